"""
Layer kernels with hand-derived backward passes.

Grids are channels-last: (batch, height, width, channels). Convolution is
valid (no padding) cross-correlation; pooling is non-overlapping 2x2 with
odd trailing rows/columns dropped; batch normalization is per channel
(statistics over batch and spatial axes).
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from errors import ShapeError

_PROB_LOW = np.nextafter(0.0, 1.0)
_PROB_HIGH = np.nextafter(1.0, 0.0)


def conv2d_forward(inputs: np.ndarray, filters: np.ndarray, biases: np.ndarray) -> np.ndarray:
    """Valid cross-correlation.

    Args:
        inputs: (H, W, C) or (N, H, W, C)
        filters: (F, kh, kw, C)
        biases: (F,)

    Returns:
        (H-kh+1, W-kw+1, F), with a leading batch axis if the input had one

    Raises:
        ShapeError: Channel counts disagree or the grid is smaller than the kernel
    """
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 3
    if single:
        x = x[np.newaxis]
    if x.ndim != 4:
        raise ShapeError(f"conv2d input must be H x W x C or N x H x W x C, got shape {x.shape}")
    n_filters, kh, kw, channels = filters.shape
    _, height, width, in_channels = x.shape
    if in_channels != channels:
        raise ShapeError(f"conv2d input has {in_channels} channels, filters expect {channels}")
    if height < kh or width < kw:
        raise ShapeError(f"conv2d input {height}x{width} is smaller than the {kh}x{kw} kernel")
    if biases.shape != (n_filters,):
        raise ShapeError(f"conv2d biases shape {biases.shape}, expected ({n_filters},)")

    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))
    out = np.tensordot(windows, filters.transpose(3, 1, 2, 0), axes=([3, 4, 5], [0, 1, 2])) + biases
    return out[0] if single else out


def conv2d_backward(
    dout: np.ndarray,
    inputs: np.ndarray,
    filters: np.ndarray,
    need_input_grad: bool = True,
) -> Tuple[Optional[np.ndarray], np.ndarray, np.ndarray]:
    """Gradients of conv2d_forward w.r.t. input, filters and biases (batched)."""
    _, kh, kw, _ = filters.shape
    windows = sliding_window_view(inputs, (kh, kw), axis=(1, 2))
    dfilters = np.tensordot(windows, dout, axes=([0, 1, 2], [0, 1, 2])).transpose(3, 1, 2, 0)
    dbiases = dout.sum(axis=(0, 1, 2))

    dinputs = None
    if need_input_grad:
        out_h, out_w = dout.shape[1], dout.shape[2]
        dinputs = np.zeros_like(inputs, dtype=np.float64)
        for i in range(kh):
            for j in range(kw):
                dinputs[:, i:i + out_h, j:j + out_w, :] += dout @ filters[:, i, j, :]
    return dinputs, dfilters, dbiases


@dataclass(frozen=True)
class PoolCache:
    """Argmax positions (0..3, row-major within each window) and input geometry."""
    argmax: np.ndarray
    input_shape: Tuple[int, ...]


def _to_nhwc(x: np.ndarray) -> np.ndarray:
    if x.ndim == 2:
        return x[np.newaxis, :, :, np.newaxis]
    if x.ndim == 3:
        return x[np.newaxis]
    if x.ndim == 4:
        return x
    raise ShapeError(f"Expected a 2-D, 3-D or 4-D grid, got shape {x.shape}")


def _from_nhwc(x: np.ndarray, ndim: int) -> np.ndarray:
    if ndim == 2:
        return x[0, :, :, 0]
    if ndim == 3:
        return x[0]
    return x


def maxpool2x2(inputs: np.ndarray) -> Tuple[np.ndarray, PoolCache]:
    """Non-overlapping 2x2 max pooling, stride 2; ties resolve to the first index.

    Raises:
        ShapeError: Empty input or a spatial dimension below 2
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.size == 0:
        raise ShapeError(f"maxpool2x2 got an empty input of shape {x.shape}")
    x4 = _to_nhwc(x)
    n, height, width, channels = x4.shape
    if height < 2 or width < 2:
        raise ShapeError(f"maxpool2x2 needs spatial dims >= 2, got {height}x{width}")
    ph, pw = height // 2, width // 2
    windows = (x4[:, :2 * ph, :2 * pw, :]
               .reshape(n, ph, 2, pw, 2, channels)
               .transpose(0, 1, 3, 5, 2, 4)
               .reshape(n, ph, pw, channels, 4))
    argmax = windows.argmax(axis=-1)
    pooled = np.take_along_axis(windows, argmax[..., np.newaxis], axis=-1)[..., 0]
    return _from_nhwc(pooled, x.ndim), PoolCache(argmax=argmax, input_shape=x.shape)


def maxpool2x2_backward(dout: np.ndarray, cache: PoolCache) -> np.ndarray:
    """Route each pooled gradient to the input position that won the max."""
    d4 = _to_nhwc(np.asarray(dout, dtype=np.float64))
    n, ph, pw, channels = d4.shape
    routed = np.zeros((n, ph, pw, channels, 4), dtype=np.float64)
    np.put_along_axis(routed, cache.argmax[..., np.newaxis], d4[..., np.newaxis], axis=-1)
    routed = (routed.reshape(n, ph, pw, channels, 2, 2)
              .transpose(0, 1, 4, 2, 5, 3)
              .reshape(n, 2 * ph, 2 * pw, channels))
    full_shape = _to_nhwc(np.empty(cache.input_shape)).shape
    dinputs = np.zeros(full_shape, dtype=np.float64)
    dinputs[:, :2 * ph, :2 * pw, :] = routed
    return _from_nhwc(dinputs, len(cache.input_shape))


class BatchNormResult(NamedTuple):
    out: np.ndarray
    cache: "BatchNormCache"
    running_mean: np.ndarray
    running_var: np.ndarray


@dataclass(frozen=True)
class BatchNormCache:
    xhat: np.ndarray
    gamma: np.ndarray
    inv_std: np.ndarray
    mode: str


def batchnorm(
    inputs: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    eps: float = 1e-5,
    mode: str = "train",
    running_mean: Optional[np.ndarray] = None,
    running_var: Optional[np.ndarray] = None,
    momentum: float = 0.9,
) -> BatchNormResult:
    """Per-channel batch normalization over every axis but the last.

    Train mode normalizes with biased batch statistics and returns running
    statistics moved toward them (running = momentum*running + (1-momentum)*batch);
    infer mode normalizes with the running statistics and returns them unchanged.

    Raises:
        ValueError: Unknown mode or a batch of one in train mode
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"Invalid mode '{mode}'. Must be one of: ['train', 'infer']")
    x = np.asarray(inputs, dtype=np.float64)
    features = x.shape[-1]
    if running_mean is None:
        running_mean = np.zeros(features)
    if running_var is None:
        running_var = np.ones(features)
    axes = tuple(range(x.ndim - 1))

    if mode == "train":
        if x.shape[0] < 2:
            raise ValueError("batchnorm in train mode needs a batch of at least 2 instances")
        mean = x.mean(axis=axes)
        var = x.var(axis=axes)
        new_mean = momentum * running_mean + (1.0 - momentum) * mean
        new_var = momentum * running_var + (1.0 - momentum) * var
    else:
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    out = gamma * xhat + beta
    return BatchNormResult(out, BatchNormCache(xhat, gamma, inv_std, mode), new_mean, new_var)


def batchnorm_backward(dout: np.ndarray, cache: BatchNormCache) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of batchnorm w.r.t. input, gamma and beta."""
    axes = tuple(range(dout.ndim - 1))
    dgamma = (dout * cache.xhat).sum(axis=axes)
    dbeta = dout.sum(axis=axes)
    dxhat = dout * cache.gamma
    if cache.mode == "infer":
        return dxhat * cache.inv_std, dgamma, dbeta

    count = dout.size // dout.shape[-1]
    dinputs = (cache.inv_std / count) * (
        count * dxhat
        - dxhat.sum(axis=axes)
        - cache.xhat * (dxhat * cache.xhat).sum(axis=axes)
    )
    return dinputs, dgamma, dbeta


def dense_forward(inputs: np.ndarray, weights: np.ndarray, biases: np.ndarray) -> np.ndarray:
    if inputs.shape[-1] != weights.shape[0]:
        raise ShapeError(f"dense input width {inputs.shape[-1]} does not match weights {weights.shape}")
    return inputs @ weights + biases


def dense_backward(dout: np.ndarray, inputs: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    return dout @ weights.T, inputs.T @ dout, dout.sum(axis=0)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(dout: np.ndarray, pre_activation: np.ndarray) -> np.ndarray:
    return dout * (pre_activation > 0)


def sigmoid(logits: np.ndarray) -> np.ndarray:
    """Logistic function kept strictly inside (0, 1) for any finite logit."""
    return np.clip(expit(logits), _PROB_LOW, _PROB_HIGH)


def dropout(inputs: np.ndarray, rate: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Inverted dropout: zero with probability `rate`, scale survivors by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if rate == 0.0:
        mask = np.ones_like(inputs)
    else:
        mask = (rng.random(inputs.shape) >= rate) / (1.0 - rate)
    return inputs * mask, mask
