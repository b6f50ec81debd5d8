"""
Binary cross-entropy over independent labels.
"""

import numpy as np

from errors import ShapeError

PROB_CLAMP = 1e-7


def _check(probabilities: np.ndarray, labels: np.ndarray):
    if probabilities.shape != labels.shape:
        raise ShapeError(f"probabilities shape {probabilities.shape} != labels shape {labels.shape}")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")


def bce_loss(probabilities: np.ndarray, labels: np.ndarray) -> float:
    """Mean over batch and labels of -[y log p + (1-y) log(1-p)], p clamped to [1e-7, 1-1e-7]."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    _check(p, y)
    p = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def bce_logit_gradient(probabilities: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """d bce_loss / d logits for sigmoid outputs; zero where the clamp is active."""
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    _check(p, y)
    inside = (p > PROB_CLAMP) & (p < 1.0 - PROB_CLAMP)
    return (p - y) * inside / p.size
