"""
Isolation trees stored as flat node arrays.

Node i is a leaf when feature[i] == -1; otherwise points with
x[feature[i]] < threshold[i] descend to left[i], the rest to right[i].
"""

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from errors import ShapeError

EULER_GAMMA = 0.5772156649
LEAF = -1

# random feature draws tried before falling back to a full range scan
_FEATURE_DRAWS = 8


def c_factor(n: int) -> float:
    """Average unsuccessful-search path length of a BST over n points."""
    if n <= 1:
        return 0.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


def default_height_limit(subsample_size: int) -> int:
    return int(math.ceil(math.log2(subsample_size))) if subsample_size > 1 else 0


@dataclass(frozen=True)
class IsolationTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray
    height_limit: Optional[int]

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature == LEAF))

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())


def _pick_split_feature(node_x: np.ndarray, rng: np.random.Generator) -> Optional[int]:
    n_features = node_x.shape[1]
    for _ in range(_FEATURE_DRAWS):
        f = int(rng.integers(n_features))
        column = node_x[:, f]
        if column.max() > column.min():
            return f
    spread = node_x.max(axis=0) > node_x.min(axis=0)
    candidates = np.flatnonzero(spread)
    if candidates.size == 0:
        return None
    return int(candidates[rng.integers(candidates.size)])


def _draw_split(lo: float, hi: float, rng: np.random.Generator) -> float:
    while True:
        p = float(rng.uniform(lo, hi))
        if lo < p < hi:
            return p


def build_tree(x: np.ndarray, rng: np.random.Generator, height_limit: Optional[int]) -> IsolationTree:
    """Grow one tree over the rows of x (the subsample).

    Nodes split on a feature drawn uniformly among those with nonzero range
    in the node, at a value drawn uniformly strictly inside that range. A node
    becomes a leaf at the height limit, with at most one point, or when every
    feature is constant (duplicates).
    """
    limit = math.inf if height_limit is None else height_limit
    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    size: List[int] = []
    depth: List[int] = []

    def new_node(n_points: int, d: int) -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        size.append(n_points)
        depth.append(d)
        return len(feature) - 1

    stack = [(new_node(x.shape[0], 0), np.arange(x.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if depth[node] >= limit or rows.size <= 1:
            continue
        node_x = x[rows]
        f = _pick_split_feature(node_x, rng)
        if f is None:
            continue
        column = node_x[:, f]
        p = _draw_split(float(column.min()), float(column.max()), rng)
        goes_left = column < p
        feature[node] = f
        threshold[node] = p
        left[node] = new_node(int(goes_left.sum()), depth[node] + 1)
        right[node] = new_node(int((~goes_left).sum()), depth[node] + 1)
        stack.append((right[node], rows[~goes_left]))
        stack.append((left[node], rows[goes_left]))

    return IsolationTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        size=np.asarray(size, dtype=np.int64),
        depth=np.asarray(depth, dtype=np.int64),
        height_limit=height_limit,
    )


def path_length(tree: IsolationTree, x: np.ndarray, n_features: Optional[int] = None) -> float:
    """Edges from root to x's leaf plus c(leaf size)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or (n_features is not None and x.shape[0] != n_features):
        raise ShapeError(f"Query has shape {x.shape}, expected ({n_features},)")
    node = 0
    while tree.feature[node] != LEAF:
        f = tree.feature[node]
        if f >= x.shape[0]:
            raise ShapeError(f"Query has {x.shape[0]} features, tree splits on feature {f}")
        node = tree.left[node] if x[f] < tree.threshold[node] else tree.right[node]
    return float(tree.depth[node]) + c_factor(int(tree.size[node]))


def path_lengths(tree: IsolationTree, x: np.ndarray) -> np.ndarray:
    """Vectorized path_length over the rows of x, descending one level per pass."""
    node = np.zeros(x.shape[0], dtype=np.int64)
    rows = np.arange(x.shape[0])
    active = tree.feature[node] != LEAF
    while active.any():
        idx = rows[active]
        current = node[idx]
        goes_left = x[idx, tree.feature[current]] < tree.threshold[current]
        node[idx] = np.where(goes_left, tree.left[current], tree.right[current])
        active[idx] = tree.feature[node[idx]] != LEAF
    leaf_c = np.array([c_factor(int(s)) for s in tree.size])
    return tree.depth[node].astype(np.float64) + leaf_c[node]
