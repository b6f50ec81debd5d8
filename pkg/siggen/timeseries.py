"""
Uniformly sampled acceleration signal for one sensor channel.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .profiles import Health


@dataclass(frozen=True)
class TimeSeries:
    """One accelerometer channel with its provenance."""

    samples: np.ndarray
    sample_rate_hz: float
    channel: str
    health: Health = Health.HEALTHY
    seed: Optional[int] = None
    source: Optional[str] = None

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"TimeSeries samples must be 1-D, got shape {samples.shape}")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        bad = np.flatnonzero(~np.isfinite(samples))
        if bad.size:
            raise ValueError(f"TimeSeries contains non-finite value at sample {int(bad[0])}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz
