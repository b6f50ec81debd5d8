"""
Tests for the synthetic signal generator, rig profiles and signal files.
"""

import json

import numpy as np
import pytest

from errors import ConfigError, DataFormatError
from siggen import (
    COMPONENT_ORDER,
    ComponentProfile,
    FaultSignature,
    Health,
    RigProfile,
    TimeSeries,
    generate_rig_signals,
    generate_signal,
    load_rig_profile,
    load_timeseries,
    save_rig_profile,
    save_timeseries,
    synthesize_samples,
)
from spectro import StftConfig, spectral_distance


def single_tone_rig(tones, sample_rate_hz=40000.0, **signature):
    profile = ComponentProfile(
        name="ring gear",
        tones=tones,
        fault_signature=FaultSignature(sideband_spacing_hz=12.0, **signature),
    )
    return profile, RigProfile(sample_rate_hz=sample_rate_hz, components=[profile])


class TestGenerateSignal:
    """Sample counts, determinism and health-state behavior."""

    def test_exact_sample_count(self, small_rig):
        """A 0.5 s signal at 4 kHz has exactly 2000 samples."""
        ts = generate_signal(small_rig.components[0], small_rig, Health.HEALTHY, 0.5, seed=1)
        assert len(ts) == 2000
        assert ts.sample_rate_hz == 4000.0
        assert ts.duration_s == pytest.approx(0.5)

    def test_same_seed_same_samples(self, small_rig):
        """Generation is a pure function of its arguments."""
        profile = small_rig.components[1]
        a = generate_signal(profile, small_rig, Health.DAMAGED, 0.25, seed=42)
        b = generate_signal(profile, small_rig, Health.DAMAGED, 0.25, seed=42)
        c = generate_signal(profile, small_rig, Health.DAMAGED, 0.25, seed=43)
        assert np.array_equal(a.samples, b.samples)
        assert not np.array_equal(a.samples, c.samples)

    def test_fractional_sample_count_rejected(self, small_rig):
        """Durations that do not give a whole number of samples are refused."""
        with pytest.raises(ValueError) as exc_info:
            generate_signal(small_rig.components[0], small_rig, Health.HEALTHY, 0.10001, seed=0)
        assert "integer" in str(exc_info.value)

    def test_non_positive_duration_rejected(self, small_rig):
        with pytest.raises(ValueError):
            generate_signal(small_rig.components[0], small_rig, Health.HEALTHY, 0.0, seed=0)

    def test_content_above_nyquist_rejected(self, small_rig):
        """A tone at or above fs/2 cannot be generated."""
        profile = ComponentProfile(
            name="ring gear",
            tones=[(2500.0, 1.0)],
            fault_signature=FaultSignature(sideband_spacing_hz=10.0),
        )
        with pytest.raises(ValueError) as exc_info:
            generate_signal(profile, small_rig, Health.HEALTHY, 0.25, seed=0)
        assert "Nyquist" in str(exc_info.value)

    def test_identity_fault_signature_reproduces_healthy(self, small_rig):
        """Zero fault amplitudes and unit noise gain leave the damaged signal unchanged."""
        profile = ComponentProfile(
            name="ring gear",
            tones=[(132.0, 0.8)],
            noise_sigma=0.5,
            fault_signature=FaultSignature(sideband_spacing_hz=12.0),
        )
        assert profile.fault_signature.is_identity
        healthy = generate_signal(profile, small_rig, Health.HEALTHY, 0.5, seed=9)
        damaged = generate_signal(profile, small_rig, Health.DAMAGED, 0.5, seed=9)
        assert np.array_equal(healthy.samples, damaged.samples)

    def test_damage_raises_signal_energy(self, small_rig):
        """Default fault signatures lift the noise floor and add bursts."""
        for profile in small_rig.components:
            healthy = generate_signal(profile, small_rig, Health.HEALTHY, 1.0, seed=5)
            damaged = generate_signal(profile, small_rig, Health.DAMAGED, 1.0, seed=5)
            assert damaged.samples.std() > 2 * healthy.samples.std()

    def test_single_tone_lands_on_its_bin(self):
        """A noise-free 600 Hz tone over 1 s at 40 kHz puts all DFT magnitude in the 600 Hz bin."""
        profile, rig = single_tone_rig([(600.0, 1.0)])
        spectrum = np.abs(np.fft.rfft(synthesize_samples(profile, rig, Health.HEALTHY, 1.0, seed=3)))
        peak = int(np.argmax(spectrum))
        assert peak == 600
        assert np.delete(spectrum, peak).max() < 1e-9 * spectrum[peak]

    def test_single_tone_survives_float32_snapping(self):
        """The stored series keeps the peak; float32 rounding leaks far below the tone."""
        profile, rig = single_tone_rig([(600.0, 1.0)])
        spectrum = np.abs(np.fft.rfft(generate_signal(profile, rig, Health.HEALTHY, 1.0, seed=3).samples))
        assert int(np.argmax(spectrum)) == 600
        assert np.delete(spectrum, 600).max() < 1e-6 * spectrum[600]

    def test_empty_noise_free_profile_is_silent(self):
        profile, rig = single_tone_rig([], sample_rate_hz=4000.0)
        ts = generate_signal(profile, rig, Health.HEALTHY, 0.5, seed=8)
        assert len(ts) == 2000
        assert not ts.samples.any()

    @pytest.mark.parametrize("health", [Health.HEALTHY, Health.DAMAGED])
    def test_energy_sits_at_tones_and_sidebands(self, health):
        """Noise-free content: at least 99.9% of the energy within one bin of a declared line."""
        profile, rig = single_tone_rig([(132.0, 0.8), (264.0, 0.3)], sample_rate_hz=4000.0,
                                       sideband_amplitude=0.4)
        samples = generate_signal(profile, rig, health, 1.0, seed=21).samples
        energy = np.abs(np.fft.rfft(samples)) ** 2
        lines = [132.0, 264.0]
        if health == Health.DAMAGED:
            lines += [f + s for f in (132.0, 264.0) for s in (-12.0, 12.0)]
        bins = np.arange(energy.size)  # 1 Hz spacing over 1 s
        near = np.zeros(energy.size, dtype=bool)
        for line in lines:
            near |= np.abs(bins - line) <= 1
        assert energy[near].sum() >= 0.999 * energy.sum()

    def test_damage_is_spectrally_separable(self, small_rig):
        """Healthy-vs-damaged distance exceeds five times the healthy-vs-healthy distance."""
        cfg = StftConfig()
        between, within = [], []
        for profile in small_rig.components:
            first = generate_signal(profile, small_rig, Health.HEALTHY, 4.0, seed=1)
            second = generate_signal(profile, small_rig, Health.HEALTHY, 4.0, seed=2)
            damaged = generate_signal(profile, small_rig, Health.DAMAGED, 4.0, seed=3)
            within.append(spectral_distance(first, second, cfg))
            between.append(spectral_distance(first, damaged, cfg))
        assert np.mean(between) > 5 * np.mean(within)

    def test_rig_signals_cover_every_source(self, small_rig):
        """Three components in two health states, in component order."""
        signals = generate_rig_signals(small_rig, 0.5, seed=11)
        assert len(signals) == 6
        assert [key[0] for key in signals][::2] == list(COMPONENT_ORDER)
        seeds = {ts.seed for ts in signals.values()}
        assert len(seeds) == 6


class TestTimeSeries:
    def test_rejects_non_finite_samples(self):
        with pytest.raises(ValueError) as exc_info:
            TimeSeries(samples=np.array([0.0, np.nan, 1.0]), sample_rate_hz=10.0, channel="x")
        assert "sample 1" in str(exc_info.value)

    def test_rejects_two_dimensional_samples(self):
        with pytest.raises(ValueError):
            TimeSeries(samples=np.zeros((2, 2)), sample_rate_hz=10.0, channel="x")


class TestSignalFiles:
    """CSV and raw-f32-le signal files."""

    def test_csv_round_trip_is_exact(self, tmp_path):
        ts = TimeSeries(samples=np.array([0.1, -2.5e-7, 3.0, 1 / 3]), sample_rate_hz=100.0, channel="c")
        path = save_timeseries(ts, tmp_path / "s.csv", "csv")
        loaded = load_timeseries(path, "csv", 100.0, channel="c")
        assert np.array_equal(loaded.samples, ts.samples)

    def test_generated_signal_raw_round_trip_is_identity(self, tmp_path, small_rig):
        """A generated second written as raw-f32-le loads back sample for sample."""
        for health in (Health.HEALTHY, Health.DAMAGED):
            ts = generate_signal(small_rig.components[2], small_rig, health, 1.0, seed=17)
            path = save_timeseries(ts, tmp_path / f"{health}.f32", "raw-f32-le")
            loaded = load_timeseries(path, "raw-f32-le", small_rig.sample_rate_hz, health=health)
            assert np.array_equal(loaded.samples, ts.samples)
            assert loaded.health == health

    def test_raw_file_size(self, tmp_path):
        """Four bytes per sample, no header."""
        one = save_timeseries(TimeSeries(samples=np.zeros(1), sample_rate_hz=40000.0, channel="c"),
                              tmp_path / "one.f32", "raw-f32-le")
        second = save_timeseries(TimeSeries(samples=np.zeros(40000), sample_rate_hz=40000.0, channel="c"),
                                 tmp_path / "second.f32", "raw-f32-le")
        assert one.stat().st_size == 4
        assert second.stat().st_size == 160000

    def test_truncated_raw_file_reports_offset(self, tmp_path):
        """A length that is not a multiple of 4 is a format error at the stray bytes."""
        path = tmp_path / "bad.f32"
        path.write_bytes(b"\x00" * 9)
        with pytest.raises(DataFormatError) as exc_info:
            load_timeseries(path, "raw-f32-le", 100.0)
        assert exc_info.value.offset == 8
        assert "truncated" in str(exc_info.value)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_bytes(b"")
        with pytest.raises(DataFormatError):
            load_timeseries(path, "csv", 100.0)

    def test_malformed_csv_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0\n2.0\nabc\n", encoding="utf-8")
        with pytest.raises(DataFormatError) as exc_info:
            load_timeseries(path, "csv", 100.0)
        assert exc_info.value.offset == 3
        assert "line 3" in str(exc_info.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataFormatError):
            load_timeseries(tmp_path / "nope.csv", "csv", 100.0)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError) as exc_info:
            load_timeseries(tmp_path / "x", "wav", 100.0)
        assert "Must be one of" in str(exc_info.value)


class TestRigProfiles:
    def test_profile_round_trip(self, tmp_path, small_rig):
        path = save_rig_profile(small_rig, tmp_path / "rig.json")
        assert load_rig_profile(path) == small_rig

    def test_invalid_profile_is_config_error(self, tmp_path, small_rig):
        """Shaft speeds that contradict the transmission ratio are a schema violation."""
        raw = json.loads(small_rig.model_dump_json())
        raw["transmission_ratio"] = 10.0
        path = tmp_path / "rig.json"
        path.write_text(json.dumps(raw), encoding="utf-8")
        with pytest.raises(ConfigError):
            load_rig_profile(path)

    def test_missing_profile_is_data_error(self, tmp_path):
        with pytest.raises(DataFormatError):
            load_rig_profile(tmp_path / "missing.json")
