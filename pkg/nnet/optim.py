"""
Adam optimizer with bias-corrected moments.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from errors import NumericError, ShapeError


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Dict[str, np.ndarray], **hyperparameters) -> "AdamState":
        state = cls(**hyperparameters)
        for name, value in params.items():
            state.first_moment[name] = np.zeros_like(value, dtype=np.float64)
            state.second_moment[name] = np.zeros_like(value, dtype=np.float64)
        return state


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """One update theta <- theta - lr * m_hat / (sqrt(v_hat) + eps), in place.

    Raises:
        NumericError: A gradient holds a non-finite value (names the parameter)
        ShapeError: Gradient and parameter shapes differ
    """
    for name, grad in grads.items():
        if name not in params:
            raise ShapeError(f"Gradient for unknown parameter '{name}'")
        if grad.shape != params[name].shape:
            raise ShapeError(f"Gradient '{name}' shape {grad.shape} != parameter shape {params[name].shape}")
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"Non-finite gradient for parameter '{name}' at step {state.step + 1}")

    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for name, grad in grads.items():
        if name not in state.first_moment:
            state.first_moment[name] = np.zeros_like(grad, dtype=np.float64)
            state.second_moment[name] = np.zeros_like(grad, dtype=np.float64)
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        params[name] -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.epsilon)
    return params, state
