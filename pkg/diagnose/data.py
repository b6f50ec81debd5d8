"""
Synthetic data plumbing for both stages: per-source segment pools, the
stage-1 (whole-gearbox) and stage-2 (channel-mixed) datasets, and batches
of stacked segments handed to the models.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from config import DatasetParams, derive_seed
from errors import FingerprintMismatchError, ShapeError
from logging_config import spectro_logger
from siggen import Health, RigProfile, TimeSeries, generate_rig_signals
from spectro import (
    LabeledDataset,
    SpectrogramSegment,
    StftConfig,
    assemble_dataset,
    sample_segments,
    stft,
)
from spectro.dataset import PoolKey

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SegmentBatch:
    """Stacked instances (N, frames, bins, channels) with their labels."""
    inputs: np.ndarray
    labels: np.ndarray
    fingerprint: str
    ids: List[str]

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def segment_shape(self):
        return tuple(self.inputs.shape[1:])

    def select(self, mask: np.ndarray) -> "SegmentBatch":
        index = np.flatnonzero(mask)
        return SegmentBatch(self.inputs[index], self.labels[index], self.fingerprint,
                            [self.ids[i] for i in index])

    @classmethod
    def from_segments(cls, segments: Sequence[SpectrogramSegment]) -> "SegmentBatch":
        """Batch explicit segments; each must carry labels and share one fingerprint and shape."""
        if not segments:
            raise ValueError("No segments given")
        shapes = {s.magnitudes.shape for s in segments}
        if len(shapes) != 1:
            raise ShapeError(f"Segments differ in shape: {sorted(shapes)}")
        fingerprints = {s.fingerprint for s in segments}
        if len(fingerprints) != 1:
            raise FingerprintMismatchError(f"Segments come from different preprocessing: {sorted(fingerprints)}")
        labels = []
        for s in segments:
            if s.labels is None:
                labels.append([1 if h == Health.DAMAGED else 0 for h in s.healths])
            else:
                labels.append([int(v) for v in s.labels])
        return cls(
            inputs=np.stack([s.magnitudes for s in segments]),
            labels=np.asarray(labels, dtype=np.int8),
            fingerprint=segments[0].fingerprint,
            ids=[f"segment-{i}" for i in range(len(segments))],
        )

    @classmethod
    def from_partition(cls, dataset: LabeledDataset, name: str) -> "SegmentBatch":
        """Instances of one split, kept at the bank's float32 precision."""
        part = dataset.partition(name)
        grids = dataset.bank[part.sources] if len(part) else np.empty((0, 3) + dataset.bank.shape[1:], np.float32)
        return cls(
            inputs=np.ascontiguousarray(grids.transpose(0, 2, 3, 1)),
            labels=part.labels.astype(np.int8),
            fingerprint=dataset.fingerprint,
            ids=[f"{name}-{int(i)}" for i in part.instance_ids],
        )


def build_pools(
    rig: RigProfile,
    stft_config: StftConfig,
    params: DatasetParams,
    master_seed: int,
    signals: Optional[Dict] = None,
) -> Dict[PoolKey, List[SpectrogramSegment]]:
    """Segment pools keyed by (component, health) from one synthetic recording per source."""
    if signals is None:
        signals = generate_rig_signals(rig, params.signal_duration_s, derive_seed(master_seed, "signals"))
    pools: Dict[PoolKey, List[SpectrogramSegment]] = {}
    spectro_logger.started(
        "build_pools", sources=len(signals), segments_per_source=params.segments_per_source,
        segment_duration_s=params.segment_duration_s,
    )
    for (name, health), ts in signals.items():
        spec = stft(ts, stft_config)
        pools[(name, health)] = sample_segments(
            spec, params.segment_duration_s, params.segments_per_source,
            derive_seed(master_seed, f"segments/{name}/{health}"),
        )
    spectro_logger.finished("build_pools", pools=len(pools))
    return pools


def stage2_dataset(pools, params: DatasetParams, stft_config: StftConfig, master_seed: int) -> LabeledDataset:
    """Channel-mixed dataset covering all eight label combinations."""
    return assemble_dataset(
        pools,
        ratios=params.ratios,
        total=params.stage2_total,
        seed=derive_seed(master_seed, "dataset/stage2"),
        mixing=params.mixing,
        damaged_fraction=params.damaged_fraction,
        stft_config=stft_config,
    )


def stage1_dataset(pools, params: DatasetParams, stft_config: StftConfig, master_seed: int) -> LabeledDataset:
    """Whole-gearbox dataset: each instance is entirely healthy or entirely damaged."""
    return assemble_dataset(
        pools,
        ratios=params.ratios,
        total=params.stage1_total,
        seed=derive_seed(master_seed, "dataset/stage1"),
        mixing=False,
        damaged_fraction=params.damaged_fraction,
        stft_config=stft_config,
    )


def signals_from_files(series: Sequence[TimeSeries]) -> Dict:
    """Key measured series by (channel, health) for build_pools."""
    keyed = {}
    for ts in series:
        key = (ts.channel, ts.health)
        if key in keyed:
            raise ValueError(f"Duplicate series for {key}")
        keyed[key] = ts
    return keyed
