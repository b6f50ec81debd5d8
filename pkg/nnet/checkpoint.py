"""
CNN checkpoints: JSON manifest with the architecture plus an f32 parameter payload.
"""

from pathlib import Path
from typing import Union

import numpy as np

from errors import DataFormatError
from logging_config import storage_logger
from store import read_container, write_container
from .model import HIDDEN_UNITS, KERNEL_SIZE, N_OUTPUTS, PARAM_ORDER, CnnModel

MODEL_FORMAT = "geardiag-cnn"
MODEL_VERSION = 1

PathLike = Union[str, Path]


def save_model(model: CnnModel, path: PathLike) -> Path:
    header = {
        "model_id": model.model_id,
        "fingerprint": model.fingerprint,
        "architecture": {
            "input_shape": list(model.input_shape),
            "n_filters": model.n_filters,
            "kernel": [KERNEL_SIZE, KERNEL_SIZE],
            "pool": [2, 2],
            "hidden_units": HIDDEN_UNITS,
            "hidden_activation": "relu",
            "n_outputs": N_OUTPUTS,
            "output_activation": "sigmoid",
            "dropout_rate": model.dropout_rate,
            "batchnorm": {"momentum": model.bn_momentum, "epsilon": model.bn_epsilon},
        },
        "seed": model.seed,
        "train_config": model.train_config,
        "parameter_order": list(PARAM_ORDER) + ["bn_running_mean", "bn_running_var"],
    }
    arrays = {name: model.params[name] for name in PARAM_ORDER}
    arrays["bn_running_mean"] = model.running_mean
    arrays["bn_running_var"] = model.running_var
    written = write_container(path, MODEL_FORMAT, MODEL_VERSION, header, arrays)
    storage_logger.finished("save_model", path=str(written), model_id=model.model_id)
    return written


def load_model(path: PathLike) -> CnnModel:
    """Load a checkpoint written by save_model.

    Raises:
        VersionMismatchError: Different format tag or version
        ChecksumError: Payload truncated or modified
        DataFormatError: Array shapes disagree with the recorded architecture
    """
    manifest, arrays = read_container(path, MODEL_FORMAT, MODEL_VERSION)
    arch = manifest.get("architecture")
    if not isinstance(arch, dict) or arch.get("hidden_units") != HIDDEN_UNITS or arch.get("n_outputs") != N_OUTPUTS:
        raise DataFormatError(f"{path}: unsupported architecture {arch}", path=str(path))

    try:
        model = CnnModel(
            input_shape=tuple(int(v) for v in arch["input_shape"]),
            n_filters=int(arch["n_filters"]),
            params={name: arrays[name] for name in PARAM_ORDER if name in arrays},
            running_mean=arrays.get("bn_running_mean"),
            running_var=arrays.get("bn_running_var"),
            dropout_rate=float(arch["dropout_rate"]),
            bn_momentum=float(arch["batchnorm"]["momentum"]),
            bn_epsilon=float(arch["batchnorm"]["epsilon"]),
            seed=int(manifest.get("seed", 0)),
            train_config=manifest.get("train_config"),
            model_id=manifest.get("model_id", ""),
            fingerprint=manifest.get("fingerprint", ""),
        )
    except KeyError as e:
        raise DataFormatError(f"{path}: checkpoint manifest lacks field {e.args[0]!r}", path=str(path))
    except (TypeError, ValueError) as e:
        raise DataFormatError(f"{path}: malformed checkpoint manifest: {e}", path=str(path))
    expected = {
        "conv_w": (model.n_filters, KERNEL_SIZE, KERNEL_SIZE, model.input_shape[2]),
        "conv_b": (model.n_filters,),
        "bn_gamma": (model.n_filters,),
        "bn_beta": (model.n_filters,),
        "dense_w": (model.feature_length, HIDDEN_UNITS),
        "dense_b": (HIDDEN_UNITS,),
        "out_w": (HIDDEN_UNITS, N_OUTPUTS),
        "out_b": (N_OUTPUTS,),
    }
    for name, shape in expected.items():
        if name not in model.params or model.params[name].shape != shape:
            actual = None if name not in model.params else model.params[name].shape
            raise DataFormatError(f"{path}: parameter '{name}' has shape {actual}, expected {shape}", path=str(path))
    for stat in (model.running_mean, model.running_var):
        if stat is None or stat.shape != (model.n_filters,):
            raise DataFormatError(f"{path}: batchnorm running statistics missing or misshapen", path=str(path))
    if not all(np.all(np.isfinite(v)) for v in model.params.values()):
        raise DataFormatError(f"{path}: non-finite parameter values", path=str(path))
    return model
