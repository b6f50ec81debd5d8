"""
Fixed-duration spectrogram segments: sampling with replacement and
channel stacking.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import FingerprintMismatchError, ShapeError
from siggen import COMPONENT_ORDER, Health
from .stft import Spectrogram, frames_per_segment, preprocessing_fingerprint


@dataclass(frozen=True)
class SpectrogramSegment:
    """One training/inference instance: frames x bins x channels."""
    magnitudes: np.ndarray
    duration_s: float
    fingerprint: str
    channels: Tuple[str, ...]
    healths: Tuple[Health, ...]
    offsets_s: Tuple[float, ...]
    labels: Optional[np.ndarray] = None
    sample_rate_hz: float = 40000.0
    bin_spacing_hz: float = 4.0
    hop_s: float = 0.05
    source_ids: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.magnitudes.ndim != 3:
            raise ShapeError(f"Segment grid must be frames x bins x channels, got {self.magnitudes.shape}")
        if len(self.channels) != self.magnitudes.shape[2]:
            raise ShapeError(f"{len(self.channels)} channel names for {self.magnitudes.shape[2]} channels")
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if not np.isin(labels, (0, 1)).all():
                raise ValueError(f"Segment labels must be 0 or 1, got {labels.tolist()}")
            object.__setattr__(self, "labels", labels.astype(np.int8))

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.magnitudes.shape


def sample_segments(
    spec: Spectrogram,
    duration_s: float,
    count: int,
    seed: int,
) -> List[SpectrogramSegment]:
    """Draw `count` segments with replacement at uniformly random frame offsets.

    Offsets fall on the frame grid so every segment holds the same number
    of frames (16 at 1 s with the default 0.25 s window and 0.05 s hop).

    Raises:
        ValueError: count < 1 or duration longer than the spectrogram span
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if duration_s > spec.span_s + 1e-9:
        raise ValueError(
            f"Segment duration {duration_s} s exceeds the spectrogram span of {spec.span_s:.4f} s "
            f"({spec.channel}/{spec.health})"
        )
    frames = frames_per_segment(spec.config, duration_s)
    last_start = spec.n_frames - frames
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, last_start + 1, size=count)

    fingerprint = preprocessing_fingerprint(spec.config, spec.sample_rate_hz, duration_s)
    segments = []
    for start in starts:
        start = int(start)
        segments.append(SpectrogramSegment(
            magnitudes=spec.magnitudes[start:start + frames, :, np.newaxis],
            duration_s=duration_s,
            fingerprint=fingerprint,
            channels=(spec.channel,),
            healths=(spec.health,),
            offsets_s=(float(spec.frame_times_s[start]),),
            sample_rate_hz=spec.sample_rate_hz,
            bin_spacing_hz=spec.bin_spacing_hz,
            hop_s=spec.config.hop_s,
        ))
    return segments


def stack_channels(
    segments: Sequence[SpectrogramSegment],
    labels: Optional[Sequence[int]] = None,
) -> SpectrogramSegment:
    """Stack one single-channel segment per component into a 3-channel instance.

    Channels are ordered ring gear, LSS bearing, HSS bearing; label j is the
    health of channel j. Explicit labels must agree with the segments' health.

    Raises:
        ShapeError: Wrong number of segments or differing grid shapes
        FingerprintMismatchError: Segments from different preprocessing
        ValueError: Labels not binary or contradicting the channel health
    """
    if len(segments) != len(COMPONENT_ORDER):
        raise ShapeError(f"Expected {len(COMPONENT_ORDER)} segments, got {len(segments)}")
    if any(s.magnitudes.shape[2] != 1 for s in segments):
        raise ShapeError("stack_channels takes single-channel segments")

    by_name = {s.channels[0]: s for s in segments}
    if set(by_name) == set(COMPONENT_ORDER):
        ordered = [by_name[name] for name in COMPONENT_ORDER]
    else:
        ordered = list(segments)

    shapes = {s.magnitudes.shape for s in ordered}
    if len(shapes) != 1:
        raise ShapeError(f"Segment shapes differ: {sorted(shapes)}")
    fingerprints = {s.fingerprint for s in ordered}
    if len(fingerprints) != 1:
        raise FingerprintMismatchError(f"Segments come from different preprocessing: {sorted(fingerprints)}")

    derived = np.array([1 if s.healths[0] == Health.DAMAGED else 0 for s in ordered], dtype=np.int8)
    if labels is not None:
        given = np.asarray(labels)
        if given.shape != (len(COMPONENT_ORDER),) or not np.isin(given, (0, 1)).all():
            raise ValueError(f"labels must be a {len(COMPONENT_ORDER)}-element 0/1 vector, got {given.tolist()}")
        if not np.array_equal(given, derived):
            raise ValueError(f"labels {given.tolist()} contradict channel health {derived.tolist()}")

    first = ordered[0]
    return SpectrogramSegment(
        magnitudes=np.concatenate([s.magnitudes for s in ordered], axis=2),
        duration_s=first.duration_s,
        fingerprint=first.fingerprint,
        channels=tuple(s.channels[0] for s in ordered),
        healths=tuple(s.healths[0] for s in ordered),
        offsets_s=tuple(s.offsets_s[0] for s in ordered),
        labels=derived,
        sample_rate_hz=first.sample_rate_hz,
        bin_spacing_hz=first.bin_spacing_hz,
        hop_s=first.hop_s,
        source_ids=tuple(sid for s in ordered for sid in s.source_ids),
    )
