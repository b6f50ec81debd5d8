"""
Isolation forest fit on healthy-only features.

Scores follow the usual normalization s = 2^(-E[h(x)] / c(psi)) and are
reported with a signed counterpart, signed = offset - s, where the offset
is set from the training scores so that roughly a `contamination` fraction
of training instances come out negative (anomalous).
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from errors import ShapeError
from logging_config import anomaly_logger
from .tree import IsolationTree, build_tree, c_factor, default_height_limit, path_lengths

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnomalyScore:
    s: float
    signed: float
    mean_path_length: float

    @property
    def is_anomaly(self) -> bool:
        return self.signed < 0


@dataclass(frozen=True)
class ScoreBatch:
    s: np.ndarray
    signed: np.ndarray
    mean_path_length: np.ndarray

    def __len__(self) -> int:
        return int(self.s.shape[0])

    @property
    def anomalous(self) -> np.ndarray:
        return self.signed < 0

    def __getitem__(self, i: int) -> AnomalyScore:
        return AnomalyScore(float(self.s[i]), float(self.signed[i]), float(self.mean_path_length[i]))


@dataclass
class IsolationForest:
    n_features: int
    subsample_size: int
    contamination: float
    seed: int
    trees: List[IsolationTree] = field(default_factory=list)
    offset: float = 0.5
    training_size: int = 0
    height_limit: Optional[int] = None

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    @property
    def fitted(self) -> bool:
        return bool(self.trees)


def normalized_score(mean_path_length, subsample_size: int):
    """s = 2^(-E[h] / c(psi)); equals 0.5 when E[h] == c(psi)."""
    return np.power(2.0, -np.asarray(mean_path_length, dtype=np.float64) / c_factor(subsample_size))


def _as_matrix(features) -> np.ndarray:
    if isinstance(features, np.ndarray):
        x = np.asarray(features, dtype=np.float64)
    else:
        x = np.stack([np.asarray(getattr(v, "values", v), dtype=np.float64) for v in features])
    if x.ndim == 1:
        x = x[np.newaxis]
    if x.ndim != 2:
        raise ShapeError(f"Feature matrix must be 2-D, got shape {x.shape}")
    return x


def threshold_offset(training_s: np.ndarray, contamination: float) -> float:
    """Offset for signed = offset - s.

    With k = floor(contamination * n) >= 1 the offset sits midway between the
    k-th and (k+1)-th largest training scores, so exactly k training instances
    are negative. With k == 0 it sits above the largest training score by half
    the gap between that score and the median.
    """
    s = np.sort(np.asarray(training_s, dtype=np.float64))[::-1]
    n = s.shape[0]
    k = int(np.floor(contamination * n))
    if k >= 1:
        return float(0.5 * (s[k - 1] + s[k]))
    top = float(s[0])
    margin = 0.5 * (top - float(np.median(s)))
    return top + max(margin, np.finfo(np.float64).eps)


def _canonical_order(x: np.ndarray) -> np.ndarray:
    """Lexicographic row order so fits do not depend on training order."""
    return np.lexsort(x.T[::-1])


def fit_forest(
    features: Union[np.ndarray, Sequence],
    n_trees: int = 100,
    subsample_size: int = 256,
    contamination: float = 0.0001,
    seed: int = 0,
    height_limit: Optional[int] = None,
    n_jobs: int = 1,
    oversample: bool = False,
) -> IsolationForest:
    """Fit an isolation forest.

    Each tree grows on its own subsample of min(psi, n) rows drawn without
    replacement (or psi rows with replacement when `oversample` is set and
    psi > n) from a Generator seeded by SeedSequence(seed).spawn. Trees may
    be built on `n_jobs` threads; results do not depend on scheduling.

    Raises:
        ValueError: Fewer than 2 rows, bad parameters, or no feature varies
    """
    x = _as_matrix(features)
    n, n_features = x.shape
    if n < 2:
        raise ValueError(f"Isolation forest needs at least 2 training vectors, got {n}")
    if n_trees < 1:
        raise ValueError(f"n_trees must be >= 1, got {n_trees}")
    if subsample_size < 2:
        raise ValueError(f"subsample_size must be >= 2, got {subsample_size}")
    if not 0.0 < contamination < 0.5:
        raise ValueError(f"contamination must lie in (0, 0.5), got {contamination}")
    if not np.all(np.isfinite(x)):
        raise ValueError("Training features contain non-finite values")
    if not np.any(x.max(axis=0) > x.min(axis=0)):
        raise ValueError("Training features are constant: no split possible on any feature")

    replace = oversample and subsample_size > n
    psi = subsample_size if replace else min(subsample_size, n)
    limit = default_height_limit(psi) if height_limit is None else height_limit
    x = x[_canonical_order(x)]
    children = np.random.SeedSequence(seed).spawn(n_trees)

    def grow(child: np.random.SeedSequence) -> IsolationTree:
        rng = np.random.default_rng(child)
        rows = rng.choice(n, size=psi, replace=replace)
        return build_tree(x[rows], rng, limit)

    start = time.time()
    anomaly_logger.started(
        "fit_forest", n_trees=n_trees, subsample_size=psi, contamination=contamination,
        training_size=n, n_features=n_features, n_jobs=n_jobs,
    )
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(grow, children))
    else:
        trees = [grow(child) for child in children]

    forest = IsolationForest(
        n_features=n_features,
        subsample_size=psi,
        contamination=contamination,
        seed=seed,
        trees=trees,
        training_size=n,
        height_limit=limit,
    )
    forest.offset = threshold_offset(score_batch(forest, x).s, contamination)
    anomaly_logger.finished(
        "fit_forest", elapsed_s=time.time() - start,
        offset=forest.offset, mean_depth=float(np.mean([t.max_depth for t in trees])),
    )
    return forest


def score_batch(forest: IsolationForest, features: Union[np.ndarray, Sequence]) -> ScoreBatch:
    """Scores for every row; identical to calling score() per row."""
    if not forest.fitted:
        raise ValueError("Isolation forest is not fitted")
    x = _as_matrix(features)
    if x.shape[1] != forest.n_features:
        raise ShapeError(f"Features have dimension {x.shape[1]}, forest was fit on {forest.n_features}")
    total = np.zeros(x.shape[0], dtype=np.float64)
    for tree in forest.trees:
        total += path_lengths(tree, x)
    mean_path = total / forest.n_trees
    s = normalized_score(mean_path, forest.subsample_size)
    return ScoreBatch(s=s, signed=forest.offset - s, mean_path_length=mean_path)


def score(forest: IsolationForest, x) -> AnomalyScore:
    """Score one feature vector."""
    values = np.asarray(getattr(x, "values", x), dtype=np.float64)
    if values.ndim != 1:
        raise ShapeError(f"score takes one feature vector, got shape {values.shape}")
    return score_batch(forest, values[np.newaxis])[0]
