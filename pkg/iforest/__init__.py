"""
Isolation forest for one-class novelty detection on feature vectors.
"""

from .checkpoint import forest_from_dict, forest_to_dict, load_forest, save_forest
from .forest import (
    AnomalyScore,
    IsolationForest,
    ScoreBatch,
    fit_forest,
    normalized_score,
    score,
    score_batch,
    threshold_offset,
)
from .tree import EULER_GAMMA, LEAF, IsolationTree, build_tree, c_factor, default_height_limit, path_length, path_lengths

__all__ = [
    "EULER_GAMMA",
    "LEAF",
    "AnomalyScore",
    "IsolationForest",
    "IsolationTree",
    "ScoreBatch",
    "build_tree",
    "c_factor",
    "default_height_limit",
    "fit_forest",
    "forest_from_dict",
    "forest_to_dict",
    "load_forest",
    "normalized_score",
    "path_length",
    "path_lengths",
    "save_forest",
    "score",
    "score_batch",
    "threshold_offset",
]
