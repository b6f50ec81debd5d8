"""
Short-time Fourier transform into band-limited magnitude spectrograms.

Frame f covers samples [f*hop, f*hop + window). Magnitudes are |rfft| of
the windowed frame, bins above fmax_hz are dropped and log10(m + eps) is
applied when log_amplitude is on.
"""

import json
import hashlib
import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.signal import get_window

from siggen import Health, TimeSeries

logger = logging.getLogger(__name__)

# frames transformed per rfft call; rows are independent so chunking is bit-identical
_FRAME_CHUNK = 256


class StftConfig(BaseModel):
    """STFT settings; keys double as the CLI/config-file names."""
    model_config = ConfigDict(frozen=True)

    window_s: float = Field(0.25, gt=0)
    hop_s: float = Field(0.05, gt=0)
    window_fn: Literal["hann", "rectangular"] = "hann"
    fmax_hz: float = Field(1000.0, gt=0)
    log_amplitude: bool = True
    log_epsilon: float = Field(1e-12, gt=0)

    @model_validator(mode="after")
    def _check_hop(self):
        if self.hop_s > self.window_s:
            raise ValueError(f"hop_s ({self.hop_s}) must not exceed window_s ({self.window_s})")
        return self

    @property
    def overlap_s(self) -> float:
        return self.window_s - self.hop_s


def _integral_samples(seconds: float, sample_rate_hz: float, field: str) -> int:
    exact = seconds * sample_rate_hz
    count = round(exact)
    if count < 1 or abs(exact - count) > 1e-6:
        raise ValueError(
            f"StftConfig.{field}={seconds} s at {sample_rate_hz} Hz is {exact} samples; "
            "it must be a whole number of samples"
        )
    return count


def frame_geometry(cfg: StftConfig, sample_rate_hz: float) -> tuple[int, int]:
    """(window, hop) in samples, both integral."""
    return (_integral_samples(cfg.window_s, sample_rate_hz, "window_s"),
            _integral_samples(cfg.hop_s, sample_rate_hz, "hop_s"))


def retained_bins(cfg: StftConfig, sample_rate_hz: float) -> int:
    """Bins at or below fmax_hz for this window length."""
    nyquist = sample_rate_hz / 2
    if cfg.fmax_hz > nyquist * (1 + 1e-12):
        raise ValueError(f"fmax_hz {cfg.fmax_hz} exceeds Nyquist {nyquist} Hz")
    window, _ = frame_geometry(cfg, sample_rate_hz)
    bin_freqs = np.fft.rfftfreq(window, d=1.0 / sample_rate_hz)
    return int(np.count_nonzero(bin_freqs <= cfg.fmax_hz * (1 + 1e-12)))


def frames_per_segment(cfg: StftConfig, duration_s: float) -> int:
    """Frames whose window lies fully inside a segment of duration_s."""
    if duration_s < cfg.window_s - 1e-12:
        raise ValueError(f"Segment duration {duration_s} s is shorter than one window ({cfg.window_s} s)")
    return int(np.floor((duration_s - cfg.window_s) / cfg.hop_s + 1e-9)) + 1


def preprocessing_fingerprint(cfg: StftConfig, sample_rate_hz: float, duration_s: float) -> str:
    """Stable digest of everything that shapes a segment's values."""
    payload = {
        "stft": cfg.model_dump(),
        "sample_rate_hz": float(sample_rate_hz),
        "segment_duration_s": float(duration_s),
    }
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def analysis_window(window_fn: str, length: int) -> np.ndarray:
    if window_fn == "rectangular":
        return np.ones(length, dtype=np.float64)
    return get_window("hann", length, fftbins=True)


@dataclass(frozen=True)
class Spectrogram:
    """Frame-major magnitude grid of one channel."""
    magnitudes: np.ndarray
    frame_times_s: np.ndarray
    bin_freqs_hz: np.ndarray
    config: StftConfig
    sample_rate_hz: float
    channel: str
    health: Health

    def __post_init__(self):
        expected = (self.frame_times_s.shape[0], self.bin_freqs_hz.shape[0])
        if self.magnitudes.shape != expected:
            raise ValueError(f"Spectrogram grid {self.magnitudes.shape} does not match axes {expected}")

    @property
    def n_frames(self) -> int:
        return self.magnitudes.shape[0]

    @property
    def n_bins(self) -> int:
        return self.magnitudes.shape[1]

    @property
    def bin_spacing_hz(self) -> float:
        window, _ = frame_geometry(self.config, self.sample_rate_hz)
        return self.sample_rate_hz / window

    @property
    def span_s(self) -> float:
        """Time covered from the first frame start to the last frame end."""
        return (self.n_frames - 1) * self.config.hop_s + self.config.window_s

    def linear_magnitudes(self) -> np.ndarray:
        if not self.config.log_amplitude:
            return self.magnitudes
        return np.power(10.0, self.magnitudes) - self.config.log_epsilon


def stft(ts: TimeSeries, cfg: StftConfig) -> Spectrogram:
    """Compute the band-limited magnitude spectrogram of a series.

    Raises:
        ValueError: fmax above Nyquist, non-integral window/hop sample
            counts, or a series shorter than one window
    """
    fs = ts.sample_rate_hz
    keep = retained_bins(cfg, fs)
    window, hop = frame_geometry(cfg, fs)
    if len(ts) < window:
        raise ValueError(
            f"Series of {len(ts)} samples is shorter than one window of {window} samples "
            f"(window_s={cfg.window_s}) on channel {ts.channel!r}"
        )

    bin_freqs = np.fft.rfftfreq(window, d=1.0 / fs)
    taper = analysis_window(cfg.window_fn, window)

    frames = sliding_window_view(ts.samples, window)[::hop]
    n_frames = frames.shape[0]
    magnitudes = np.empty((n_frames, keep), dtype=np.float64)
    for start in range(0, n_frames, _FRAME_CHUNK):
        chunk = frames[start:start + _FRAME_CHUNK] * taper
        magnitudes[start:start + chunk.shape[0]] = np.abs(np.fft.rfft(chunk, axis=1))[:, :keep]

    if cfg.log_amplitude:
        magnitudes = np.log10(magnitudes + cfg.log_epsilon)

    logger.debug(f"STFT {ts.channel}/{ts.health}: {n_frames} frames x {keep} bins")
    return Spectrogram(
        magnitudes=magnitudes,
        frame_times_s=np.arange(n_frames, dtype=np.float64) * hop / fs,
        bin_freqs_hz=bin_freqs[:keep],
        config=cfg,
        sample_rate_hz=fs,
        channel=ts.channel,
        health=ts.health,
    )
