"""
Labeled dataset assembly: draw instances from per-source segment pools,
shuffle and split into train/validation/test.

Instances reference rows of a shared segment bank instead of copying grids,
so a full-scale dataset costs one index triple per instance. The bank is
held as float32, which is also its archive precision.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from errors import FingerprintMismatchError, ShapeError
from siggen import COMPONENT_ORDER, Health
from .segments import SpectrogramSegment, stack_channels
from .stft import StftConfig

logger = logging.getLogger(__name__)

SPLIT_NAMES = ("train", "validation", "test")

PoolKey = Tuple[str, Health]


@dataclass
class BuildReport:
    """Diagnostics collected while assembling a dataset."""
    total: int
    split_sizes: Dict[str, int]
    unique_source_offsets: int
    label_marginals: List[float]
    label_combinations: Dict[str, int]
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "split_sizes": self.split_sizes,
            "unique_source_offsets": self.unique_source_offsets,
            "label_marginals": self.label_marginals,
            "label_combinations": self.label_combinations,
            "warnings": self.warnings,
        }


@dataclass
class DatasetPartition:
    """One split: instance ids, bank rows per channel and labels."""
    name: str
    instance_ids: np.ndarray
    sources: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return self.instance_ids.shape[0]


@dataclass
class LabeledDataset:
    """Shuffled train/validation/test partitions over a segment bank."""
    bank: np.ndarray
    bank_channel: np.ndarray
    bank_health: np.ndarray
    bank_offset_s: np.ndarray
    train: DatasetPartition
    validation: DatasetPartition
    test: DatasetPartition
    ratios: Tuple[float, float, float]
    seed: int
    duration_s: float
    fingerprint: str
    sample_rate_hz: float
    bin_spacing_hz: float
    hop_s: float
    mixing: bool
    stft_config: Optional[StftConfig] = None
    report: Optional[BuildReport] = None

    @property
    def segment_shape(self) -> Tuple[int, int, int]:
        frames, bins = self.bank.shape[1:]
        return frames, bins, len(COMPONENT_ORDER)

    def partition(self, name: str) -> DatasetPartition:
        if name not in SPLIT_NAMES:
            raise ValueError(f"Invalid split '{name}'. Must be one of: {list(SPLIT_NAMES)}")
        return getattr(self, name)

    def inputs(self, partition: DatasetPartition, index=None) -> np.ndarray:
        """Stacked float64 grids (n, frames, bins, channels) for selected rows."""
        rows = partition.sources if index is None else partition.sources[index]
        grids = self.bank[rows]
        return np.ascontiguousarray(grids.transpose(0, 2, 3, 1), dtype=np.float64)

    def segment(self, partition: DatasetPartition, i: int) -> SpectrogramSegment:
        """Materialize one instance as a stacked SpectrogramSegment."""
        parts = []
        for row in partition.sources[i]:
            row = int(row)
            parts.append(SpectrogramSegment(
                magnitudes=self.bank[row][:, :, np.newaxis].astype(np.float64),
                duration_s=self.duration_s,
                fingerprint=self.fingerprint,
                channels=(COMPONENT_ORDER[int(self.bank_channel[row])],),
                healths=(Health.DAMAGED if self.bank_health[row] else Health.HEALTHY,),
                offsets_s=(float(self.bank_offset_s[row]),),
                sample_rate_hz=self.sample_rate_hz,
                bin_spacing_hz=self.bin_spacing_hz,
                hop_s=self.hop_s,
                source_ids=(row,),
            ))
        return stack_channels(parts, partition.labels[i])


def split_sizes(total: int, ratios: Sequence[float]) -> List[int]:
    """Largest-remainder apportionment of `total` by `ratios`."""
    ratios = [float(r) for r in ratios]
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be three positive numbers, got {ratios}")
    weight = sum(ratios)
    exact = [total * r / weight for r in ratios]
    sizes = [int(np.floor(x)) for x in exact]
    remainders = sorted(range(3), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in remainders[: total - sum(sizes)]:
        sizes[i] += 1
    return sizes


def assemble_dataset(
    pools: Mapping[PoolKey, Sequence[SpectrogramSegment]],
    ratios: Sequence[float] = (8, 1, 1),
    total: int = 10000,
    seed: int = 0,
    mixing: bool = True,
    damaged_fraction: float = 0.5,
    stft_config: Optional[StftConfig] = None,
) -> LabeledDataset:
    """Build a shuffled, split dataset from per-(component, health) pools.

    With mixing on, every channel's health is drawn independently (exactly
    round(damaged_fraction * total) damaged per channel), so all eight label
    combinations occur. With mixing off an instance is a whole healthy or a
    whole damaged gearbox.

    Args:
        pools: Single-channel segments keyed by (component name, health)
        ratios: Train/validation/test proportions
        total: Number of instances across all splits
        seed: Shuffle and draw seed
        mixing: Mix channels from both source gearboxes
        damaged_fraction: Requested share of damaged labels per channel
        stft_config: Preprocessing settings recorded with the dataset

    Raises:
        ValueError: Empty or missing pools, bad ratios or total
        ShapeError / FingerprintMismatchError: Pools not homogeneous
    """
    if total < 1:
        raise ValueError(f"total must be >= 1, got {total}")
    if not 0.0 <= damaged_fraction <= 1.0:
        raise ValueError(f"damaged_fraction must lie in [0, 1], got {damaged_fraction}")
    sizes = split_sizes(total, ratios)

    bank_rows, bank_channel, bank_health, bank_offset = [], [], [], []
    pool_rows: Dict[PoolKey, np.ndarray] = {}
    reference = None
    for j, channel in enumerate(COMPONENT_ORDER):
        for h, health in enumerate((Health.HEALTHY, Health.DAMAGED)):
            pool = pools.get((channel, health))
            if not pool:
                raise ValueError(f"Pool for ({channel}, {health}) is empty or missing")
            start = len(bank_rows)
            for seg in pool:
                if reference is None:
                    reference = seg
                if seg.magnitudes.shape != reference.magnitudes.shape:
                    raise ShapeError(f"Pool ({channel}, {health}) segment shape {seg.magnitudes.shape} "
                                     f"differs from {reference.magnitudes.shape}")
                if seg.fingerprint != reference.fingerprint:
                    raise FingerprintMismatchError(f"Pool ({channel}, {health}) mixes preprocessing "
                                                   f"fingerprints {seg.fingerprint} and {reference.fingerprint}")
                bank_rows.append(seg.magnitudes[:, :, 0])
                bank_channel.append(j)
                bank_health.append(h)
                bank_offset.append(seg.offsets_s[0])
            pool_rows[(channel, health)] = np.arange(start, len(bank_rows))

    rng = np.random.default_rng(seed)
    n_channels = len(COMPONENT_ORDER)
    n_damaged = int(round(damaged_fraction * total))
    labels = np.zeros((total, n_channels), dtype=np.int8)
    if mixing:
        for j in range(n_channels):
            labels[rng.permutation(total)[:n_damaged], j] = 1
    else:
        labels[rng.permutation(total)[:n_damaged], :] = 1

    sources = np.empty((total, n_channels), dtype=np.int64)
    for j, channel in enumerate(COMPONENT_ORDER):
        for h, health in enumerate((Health.HEALTHY, Health.DAMAGED)):
            mask = labels[:, j] == h
            rows = pool_rows[(channel, health)]
            sources[mask, j] = rows[rng.integers(0, rows.shape[0], size=int(mask.sum()))]

    order = rng.permutation(total)
    bounds = np.cumsum([0] + sizes)
    partitions = []
    for k, name in enumerate(SPLIT_NAMES):
        ids = order[bounds[k]:bounds[k + 1]]
        partitions.append(DatasetPartition(name=name, instance_ids=ids,
                                           sources=sources[ids], labels=labels[ids]))

    bank_channel = np.asarray(bank_channel, dtype=np.int8)
    bank_health = np.asarray(bank_health, dtype=np.int8)
    bank_offset = np.asarray(bank_offset, dtype=np.float64)
    report = _build_report(total, sizes, sources, labels, bank_channel, bank_health, bank_offset)
    for message in report.warnings:
        logger.warning(message)

    return LabeledDataset(
        bank=np.stack(bank_rows).astype(np.float32),
        bank_channel=bank_channel,
        bank_health=bank_health,
        bank_offset_s=bank_offset,
        train=partitions[0],
        validation=partitions[1],
        test=partitions[2],
        ratios=tuple(float(r) for r in ratios),
        seed=seed,
        duration_s=reference.duration_s,
        fingerprint=reference.fingerprint,
        sample_rate_hz=reference.sample_rate_hz,
        bin_spacing_hz=reference.bin_spacing_hz,
        hop_s=reference.hop_s,
        mixing=mixing,
        stft_config=stft_config,
        report=report,
    )


def _build_report(total, sizes, sources, labels, bank_channel, bank_health, bank_offset) -> BuildReport:
    used = np.unique(sources)
    triples = {(int(bank_channel[r]), int(bank_health[r]), float(bank_offset[r])) for r in used}
    combos: Dict[str, int] = {}
    for row in labels:
        key = "".join(str(int(v)) for v in row)
        combos[key] = combos.get(key, 0) + 1

    warnings = []
    if len(triples) < 0.1 * total:
        warnings.append(
            f"Low pool diversity: {len(triples)} unique source offsets for {total} instances "
            f"(below 10%); instances repeat heavily"
        )
    return BuildReport(
        total=total,
        split_sizes=dict(zip(SPLIT_NAMES, sizes)),
        unique_source_offsets=len(triples),
        label_marginals=[float(m) for m in labels.mean(axis=0)],
        label_combinations=dict(sorted(combos.items())),
        warnings=warnings,
    )
