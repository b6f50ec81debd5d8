"""
Forest checkpoints as a single JSON document with flattened per-tree arrays.
"""

import json
from pathlib import Path
from typing import Union

import numpy as np

from errors import DataFormatError, VersionMismatchError
from store import atomic_write_text
from .forest import IsolationForest
from .tree import LEAF, IsolationTree

FOREST_FORMAT = "geardiag-iforest"
FOREST_VERSION = 1

PathLike = Union[str, Path]


def forest_to_dict(forest: IsolationForest) -> dict:
    return {
        "format": FOREST_FORMAT,
        "version": FOREST_VERSION,
        "n_features": forest.n_features,
        "subsample_size": forest.subsample_size,
        "contamination": forest.contamination,
        "seed": forest.seed,
        "offset": forest.offset,
        "training_size": forest.training_size,
        "height_limit": forest.height_limit,
        "trees": [
            {
                "feature": tree.feature.tolist(),
                "threshold": [float(v) for v in tree.threshold],
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "size": tree.size.tolist(),
                "depth": tree.depth.tolist(),
            }
            for tree in forest.trees
        ],
    }


def _tree_from_dict(raw: dict, height_limit, n_features: int) -> IsolationTree:
    tree = IsolationTree(
        feature=np.asarray(raw["feature"], dtype=np.int64),
        threshold=np.asarray(raw["threshold"], dtype=np.float64),
        left=np.asarray(raw["left"], dtype=np.int64),
        right=np.asarray(raw["right"], dtype=np.int64),
        size=np.asarray(raw["size"], dtype=np.int64),
        depth=np.asarray(raw["depth"], dtype=np.int64),
        height_limit=height_limit,
    )
    n = tree.n_nodes
    if n == 0 or any(a.shape != (n,) for a in (tree.threshold, tree.left, tree.right, tree.size, tree.depth)):
        raise ValueError("node arrays have inconsistent lengths")
    internal = tree.feature != LEAF
    if np.any(tree.feature[internal] >= n_features) or np.any(tree.feature < LEAF):
        raise ValueError("split feature index out of range")
    children = np.concatenate([tree.left[internal], tree.right[internal]])
    if np.any(children <= 0) or np.any(children >= n):
        raise ValueError("child index out of range")
    if np.any(tree.size[internal] != tree.size[tree.left[internal]] + tree.size[tree.right[internal]]):
        raise ValueError("node sizes do not sum down the tree")
    return tree


def forest_from_dict(raw: dict, source: str = "<dict>") -> IsolationForest:
    if raw.get("format") != FOREST_FORMAT or raw.get("version") != FOREST_VERSION:
        raise VersionMismatchError(
            f"{source}: expected {FOREST_FORMAT} v{FOREST_VERSION}, "
            f"found {raw.get('format')} v{raw.get('version')}",
            path=source,
        )
    try:
        n_features = int(raw["n_features"])
        trees = [_tree_from_dict(t, raw["height_limit"], n_features) for t in raw["trees"]]
        return IsolationForest(
            n_features=n_features,
            subsample_size=int(raw["subsample_size"]),
            contamination=float(raw["contamination"]),
            seed=int(raw["seed"]),
            trees=trees,
            offset=float(raw["offset"]),
            training_size=int(raw["training_size"]),
            height_limit=raw["height_limit"],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f"{source}: malformed forest checkpoint: {e}", path=source)


def save_forest(forest: IsolationForest, path: PathLike) -> Path:
    path = Path(path)
    atomic_write_text(path, json.dumps(forest_to_dict(forest), separators=(",", ":")))
    return path


def load_forest(path: PathLike) -> IsolationForest:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"Cannot read forest checkpoint {path}: {e}", path=str(path))
    if not isinstance(raw, dict):
        raise DataFormatError(f"{path} is not a forest checkpoint", path=str(path))
    return forest_from_dict(raw, source=str(path))
