"""
Single-convolution multi-label classifier and feature extractor.

Architecture: conv 3x3 (valid) -> maxpool 2x2 -> batchnorm -> ReLU ->
flatten -> dropout (train only) -> dense(4) -> ReLU -> dense(3) -> sigmoid.
"""

import hashlib
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from errors import ShapeError
from .layers import (
    BatchNormCache,
    PoolCache,
    batchnorm,
    batchnorm_backward,
    conv2d_backward,
    conv2d_forward,
    dense_backward,
    dense_forward,
    dropout,
    maxpool2x2,
    maxpool2x2_backward,
    relu,
    relu_backward,
    sigmoid,
)
from .loss import bce_logit_gradient

PARAM_ORDER = ("conv_w", "conv_b", "bn_gamma", "bn_beta", "dense_w", "dense_b", "out_w", "out_b")
KERNEL_SIZE = 3
HIDDEN_UNITS = 4
N_OUTPUTS = 3
MODES = ("train", "infer")


@dataclass
class CnnModel:
    input_shape: Tuple[int, int, int]
    n_filters: int
    params: Dict[str, np.ndarray]
    running_mean: np.ndarray
    running_var: np.ndarray
    dropout_rate: float = 0.10
    bn_momentum: float = 0.9
    bn_epsilon: float = 1e-5
    seed: int = 0
    train_config: Optional[Dict[str, Any]] = None
    model_id: str = ""
    fingerprint: str = ""

    @property
    def conv_shape(self) -> Tuple[int, int]:
        height, width, _ = self.input_shape
        return height - KERNEL_SIZE + 1, width - KERNEL_SIZE + 1

    @property
    def pooled_shape(self) -> Tuple[int, int]:
        height, width = self.conv_shape
        return height // 2, width // 2

    @property
    def feature_length(self) -> int:
        height, width = self.pooled_shape
        return height * width * self.n_filters

    def snap_to_float32(self):
        """Round every stored value to the nearest float32 so checkpoints reload bit-exactly."""
        for name in PARAM_ORDER:
            self.params[name] = self.params[name].astype(np.float32).astype(np.float64)
        self.running_mean = self.running_mean.astype(np.float32).astype(np.float64)
        self.running_var = self.running_var.astype(np.float32).astype(np.float64)

    def parameter_digest(self) -> str:
        digest = hashlib.sha256()
        for name in PARAM_ORDER:
            digest.update(np.ascontiguousarray(self.params[name], dtype="<f8").tobytes())
        return digest.hexdigest()[:16]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    model_id: str
    segment_id: Optional[str] = None

    def __len__(self) -> int:
        return int(self.values.shape[0])


@dataclass
class ForwardCache:
    """Intermediates kept from one forward pass for backward()."""
    inputs: np.ndarray
    pool_cache: PoolCache
    bn_cache: BatchNormCache
    bn_out: np.ndarray
    dropout_mask: np.ndarray
    dropped: np.ndarray
    hidden_pre: np.ndarray
    hidden: np.ndarray
    probabilities: np.ndarray
    mode: str = "train"


def _kaiming_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def check_input_shape(input_shape: Sequence[int]) -> Tuple[int, int, int]:
    """(frames, bins, channels) of a grid one conv + pool stage can consume.

    Raises:
        ShapeError: Not three dimensions, or too small for a 3x3 conv followed by 2x2 pooling
    """
    if len(input_shape) != 3:
        raise ShapeError(f"input_shape must be (frames, bins, channels), got {tuple(input_shape)}")
    height, width, channels = (int(v) for v in input_shape)
    if height < KERNEL_SIZE + 1 or width < KERNEL_SIZE + 1 or channels < 1:
        raise ShapeError(f"input_shape {tuple(input_shape)} too small for a 3x3 conv followed by 2x2 pooling")
    return height, width, channels


def init_model(
    input_shape: Sequence[int],
    n_filters: int = 4,
    seed: int = 0,
    dropout_rate: float = 0.10,
) -> CnnModel:
    """Seeded Kaiming-uniform weights, zero biases, identity batchnorm.

    Raises:
        ShapeError: Input grid too small for one conv + pool stage
        ValueError: Non-positive filter count or dropout rate outside [0, 1)
    """
    height, width, channels = check_input_shape(input_shape)
    if n_filters < 1:
        raise ValueError(f"n_filters must be positive, got {n_filters}")
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError(f"dropout_rate must lie in [0, 1), got {dropout_rate}")

    rng = np.random.default_rng(seed)
    model = CnnModel(
        input_shape=(height, width, channels),
        n_filters=n_filters,
        params={},
        running_mean=np.zeros(n_filters),
        running_var=np.ones(n_filters),
        dropout_rate=dropout_rate,
        seed=seed,
    )
    features = model.feature_length
    model.params = {
        "conv_w": _kaiming_uniform(rng, (n_filters, KERNEL_SIZE, KERNEL_SIZE, channels),
                                   KERNEL_SIZE * KERNEL_SIZE * channels),
        "conv_b": np.zeros(n_filters),
        "bn_gamma": np.ones(n_filters),
        "bn_beta": np.zeros(n_filters),
        "dense_w": _kaiming_uniform(rng, (features, HIDDEN_UNITS), features),
        "dense_b": np.zeros(HIDDEN_UNITS),
        "out_w": _kaiming_uniform(rng, (HIDDEN_UNITS, N_OUTPUTS), HIDDEN_UNITS),
        "out_b": np.zeros(N_OUTPUTS),
    }
    model.snap_to_float32()
    model.model_id = f"cnn-{n_filters}f-{model.parameter_digest()}"
    return model


def as_input_batch(model: CnnModel, batch) -> np.ndarray:
    """Coerce an array or a sequence of segments to (N, H, W, C); float32 stays float32."""
    if isinstance(batch, np.ndarray):
        x = batch if batch.dtype in (np.float32, np.float64) else batch.astype(np.float64)
    else:
        items = list(batch) if isinstance(batch, (list, tuple)) else [batch]
        x = np.stack([np.asarray(getattr(item, "magnitudes", item), dtype=np.float64) for item in items])
    if x.ndim == 3:
        x = x[np.newaxis]
    if x.ndim != 4 or tuple(x.shape[1:]) != tuple(model.input_shape):
        raise ShapeError(f"Input shape {tuple(x.shape[1:])} does not match model input {tuple(model.input_shape)}")
    return x


def _front(model: CnnModel, x: np.ndarray, mode: str):
    p = model.params
    conv = conv2d_forward(x, p["conv_w"], p["conv_b"])
    pooled, pool_cache = maxpool2x2(conv)
    bn = batchnorm(pooled, p["bn_gamma"], p["bn_beta"], model.bn_epsilon, mode,
                   model.running_mean, model.running_var, model.bn_momentum)
    return pool_cache, bn


def model_forward(
    model: CnnModel,
    batch,
    mode: str = "infer",
    rng: Optional[np.random.Generator] = None,
    return_cache: bool = False,
):
    """Label probabilities in (0, 1) for each instance, shape (N, 3).

    Train mode normalizes with batch statistics, updates the model's running
    statistics and applies dropout (rng required when dropout_rate > 0).
    """
    if mode not in MODES:
        raise ValueError(f"Invalid mode '{mode}'. Must be one of: {list(MODES)}")
    x = as_input_batch(model, batch)
    p = model.params

    pool_cache, bn = _front(model, x, mode)
    if mode == "train":
        model.running_mean, model.running_var = bn.running_mean, bn.running_var
    flat = relu(bn.out).reshape(x.shape[0], -1)

    if mode == "train" and model.dropout_rate > 0:
        if rng is None:
            raise ValueError("Train-mode forward with dropout needs an rng")
        dropped, mask = dropout(flat, model.dropout_rate, rng)
    else:
        dropped, mask = flat, np.ones_like(flat)

    hidden_pre = dense_forward(dropped, p["dense_w"], p["dense_b"])
    hidden = relu(hidden_pre)
    probabilities = sigmoid(dense_forward(hidden, p["out_w"], p["out_b"]))

    if not return_cache:
        return probabilities
    cache = ForwardCache(
        inputs=x,
        pool_cache=pool_cache,
        bn_cache=bn.cache,
        bn_out=bn.out,
        dropout_mask=mask,
        dropped=dropped,
        hidden_pre=hidden_pre,
        hidden=hidden,
        probabilities=probabilities,
        mode=mode,
    )
    return probabilities, cache


def backward(model: CnnModel, cache: Optional[ForwardCache], labels: np.ndarray) -> Dict[str, np.ndarray]:
    """Exact gradients of the mean BCE loss w.r.t. every trainable parameter.

    Raises:
        ValueError: No forward cache supplied
    """
    if cache is None:
        raise ValueError("backward needs the cache from model_forward(..., return_cache=True)")
    p = model.params
    labels = np.asarray(labels, dtype=np.float64)

    dlogits = bce_logit_gradient(cache.probabilities, labels)
    dhidden, d_out_w, d_out_b = dense_backward(dlogits, cache.hidden, p["out_w"])
    dhidden_pre = relu_backward(dhidden, cache.hidden_pre)
    ddropped, d_dense_w, d_dense_b = dense_backward(dhidden_pre, cache.dropped, p["dense_w"])
    dflat = ddropped * cache.dropout_mask
    dbn_out = relu_backward(dflat.reshape(cache.bn_out.shape), cache.bn_out)
    dpooled, d_gamma, d_beta = batchnorm_backward(dbn_out, cache.bn_cache)
    dconv = maxpool2x2_backward(dpooled, cache.pool_cache)
    _, d_conv_w, d_conv_b = conv2d_backward(dconv, cache.inputs, p["conv_w"], need_input_grad=False)

    return {
        "conv_w": d_conv_w,
        "conv_b": d_conv_b,
        "bn_gamma": d_gamma,
        "bn_beta": d_beta,
        "dense_w": d_dense_w,
        "dense_b": d_dense_b,
        "out_w": d_out_w,
        "out_b": d_out_b,
    }


def feature_matrix(model: CnnModel, batch, batch_size: int = 64) -> np.ndarray:
    """Infer-mode post-batchnorm activations, flattened, one row per instance."""
    x = as_input_batch(model, batch)
    rows = []
    for start in range(0, x.shape[0], batch_size):
        _, bn = _front(model, x[start:start + batch_size], "infer")
        rows.append(bn.out.reshape(bn.out.shape[0], -1))
    if not rows:
        return np.empty((0, model.feature_length))
    return np.concatenate(rows, axis=0)


def extract_features(model: CnnModel, segment, segment_id: Optional[str] = None) -> FeatureVector:
    """Flattened conv -> pool -> batchnorm activations of one segment (infer mode)."""
    values = feature_matrix(model, segment)
    if values.shape[0] != 1:
        raise ShapeError(f"extract_features takes one segment, got a batch of {values.shape[0]}")
    return FeatureVector(values=values[0], model_id=model.model_id, segment_id=segment_id)


def predict_probabilities(model: CnnModel, batch, batch_size: int = 64) -> np.ndarray:
    x = as_input_batch(model, batch)
    chunks = [model_forward(model, x[i:i + batch_size], "infer") for i in range(0, x.shape[0], batch_size)]
    if not chunks:
        return np.empty((0, N_OUTPUTS))
    return np.concatenate(chunks, axis=0)


def predict_labels(model: CnnModel, batch, threshold: float = 0.5) -> np.ndarray:
    """Per-label decisions p >= threshold as int8."""
    return (predict_probabilities(model, batch) >= threshold).astype(np.int8)
