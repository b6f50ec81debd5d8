"""
Spectrogram diagnostics: time/frequency resolution tradeoff, amplitude
variability per interval, and spectral distance between two signals.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from siggen import TimeSeries
from .stft import Spectrogram, StftConfig, stft


def resolution_table(
    window_values_s: Sequence[float],
    sample_rate_hz: float,
    hop_fraction: float = 1.0,
) -> List[Dict[str, float]]:
    """Frequency vs temporal resolution for candidate window lengths.

    Bin spacing is fs / N = 1 / window_s. hop_fraction scales the hop
    relative to the window (1.0 means non-overlapping windows).
    """
    if not 0 < hop_fraction <= 1:
        raise ValueError(f"hop_fraction must lie in (0, 1], got {hop_fraction}")
    rows = []
    for window_s in window_values_s:
        window_s = float(window_s)
        if window_s <= 0:
            raise ValueError(f"window_s must be positive, got {window_s}")
        window_samples = window_s * sample_rate_hz
        hop_s = window_s * hop_fraction
        rows.append({
            "window_s": window_s,
            "window_samples": window_samples,
            "bin_spacing_hz": sample_rate_hz / window_samples,
            "time_resolution_s": window_s,
            "windows_per_minute": 60.0 / window_s,
            "frames_per_second": 1.0 / hop_s,
        })
    return rows


@dataclass(frozen=True)
class IntervalVariability:
    """Amplitude variability within consecutive intervals of a spectrogram."""
    interval_s: float
    interval_starts_s: np.ndarray
    interval_cv: np.ndarray
    overall_cv: float

    @property
    def representativeness(self) -> np.ndarray:
        """Interval variability relative to the whole recording (1.0 = same)."""
        if self.overall_cv == 0:
            return np.ones_like(self.interval_cv)
        return self.interval_cv / self.overall_cv


def _mean_cv(linear: np.ndarray) -> float:
    mean = linear.mean(axis=0)
    std = linear.std(axis=0)
    valid = mean > 0
    if not valid.any():
        return 0.0
    return float(np.mean(std[valid] / mean[valid]))


def interval_variability(spec: Spectrogram, interval_s: float = 1.0) -> IntervalVariability:
    """Mean per-bin coefficient of variation of linear amplitudes per interval.

    An interval is representative when its variability is close to that of
    the whole spectrogram.

    Raises:
        ValueError: interval shorter than two hops or longer than the spectrogram
    """
    hop = spec.config.hop_s
    frames_per_interval = int(np.floor(interval_s / hop + 1e-9))
    if frames_per_interval < 2:
        raise ValueError(f"interval_s {interval_s} holds fewer than two frames at hop {hop} s")
    n_intervals = spec.n_frames // frames_per_interval
    if n_intervals < 1:
        raise ValueError(f"interval_s {interval_s} exceeds the spectrogram length")

    linear = spec.linear_magnitudes()
    cvs = np.array([
        _mean_cv(linear[k * frames_per_interval:(k + 1) * frames_per_interval])
        for k in range(n_intervals)
    ])
    return IntervalVariability(
        interval_s=interval_s,
        interval_starts_s=spec.frame_times_s[::frames_per_interval][:n_intervals],
        interval_cv=cvs,
        overall_cv=_mean_cv(linear),
    )


def spectral_distance(a: TimeSeries, b: TimeSeries, cfg: StftConfig) -> float:
    """RMS over retained bins of the log10 difference of frame-averaged spectra."""
    linear_cfg = cfg.model_copy(update={"log_amplitude": False})
    mean_a = stft(a, linear_cfg).magnitudes.mean(axis=0)
    mean_b = stft(b, linear_cfg).magnitudes.mean(axis=0)
    eps = cfg.log_epsilon
    diff = np.log10(mean_a + eps) - np.log10(mean_b + eps)
    return float(np.sqrt(np.mean(diff ** 2)))
