"""
Minimal numpy CNN: layer kernels, multi-label classifier, Adam, checkpoints.
"""

from .checkpoint import load_model, save_model
from .layers import (
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
from .loss import PROB_CLAMP, bce_logit_gradient, bce_loss
from .model import (
    PARAM_ORDER,
    CnnModel,
    FeatureVector,
    ForwardCache,
    backward,
    check_input_shape,
    extract_features,
    feature_matrix,
    init_model,
    model_forward,
    predict_labels,
    predict_probabilities,
)
from .optim import AdamState, adam_step
from .train import EpochRecord, TrainConfig, TrainHistory, batch_indices, evaluate_partition, train_multilabel

__all__ = [
    "PARAM_ORDER",
    "PROB_CLAMP",
    "AdamState",
    "CnnModel",
    "EpochRecord",
    "FeatureVector",
    "ForwardCache",
    "TrainConfig",
    "TrainHistory",
    "adam_step",
    "backward",
    "batch_indices",
    "batchnorm",
    "batchnorm_backward",
    "check_input_shape",
    "bce_logit_gradient",
    "bce_loss",
    "conv2d_backward",
    "conv2d_forward",
    "dense_backward",
    "dense_forward",
    "dropout",
    "evaluate_partition",
    "extract_features",
    "feature_matrix",
    "init_model",
    "load_model",
    "maxpool2x2",
    "maxpool2x2_backward",
    "model_forward",
    "predict_labels",
    "predict_probabilities",
    "relu",
    "relu_backward",
    "save_model",
    "sigmoid",
    "train_multilabel",
]
