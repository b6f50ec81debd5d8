"""
Mini-batch multi-label training with Adam.
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from errors import NumericError
from logging_config import training_logger
from .loss import bce_loss
from .model import CnnModel, backward, model_forward, predict_probabilities
from .optim import AdamState, adam_step

if TYPE_CHECKING:
    from spectro import DatasetPartition, LabeledDataset

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epochs: int = Field(20, ge=1)
    batch_size: int = Field(32, ge=1)
    seed: int = 0
    shuffle: bool = True
    learning_rate: float = Field(1e-3, gt=0)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    validation_loss: Optional[float]
    validation_subset_accuracy: Optional[float]
    validation_label_accuracy: Optional[List[float]]


@dataclass
class TrainHistory:
    epochs: List[EpochRecord] = field(default_factory=list)

    @property
    def train_losses(self) -> List[float]:
        return [record.train_loss for record in self.epochs]

    @property
    def final(self) -> Optional[EpochRecord]:
        return self.epochs[-1] if self.epochs else None

    def to_dict(self) -> dict:
        return {"epochs": [asdict(record) for record in self.epochs]}


def batch_indices(order: np.ndarray, batch_size: int) -> List[np.ndarray]:
    """Split `order` into batches; a trailing batch of one joins its predecessor."""
    batches = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def evaluate_partition(model: CnnModel, dataset: "LabeledDataset", partition: "DatasetPartition",
                       batch_size: int = 64) -> Tuple[float, float, List[float]]:
    """(loss, subset accuracy, per-label accuracy) of a partition in infer mode."""
    probabilities = np.concatenate([
        predict_probabilities(model, dataset.inputs(partition, slice(i, i + batch_size)))
        for i in range(0, len(partition), batch_size)
    ])
    labels = partition.labels.astype(np.int8)
    predicted = (probabilities >= 0.5).astype(np.int8)
    subset = float(np.mean(np.all(predicted == labels, axis=1)))
    per_label = [float(v) for v in np.mean(predicted == labels, axis=0)]
    return bce_loss(probabilities, labels), subset, per_label


def train_multilabel(
    model: CnnModel,
    dataset: "LabeledDataset",
    cfg: Optional[TrainConfig] = None,
) -> Tuple[CnnModel, TrainHistory]:
    """Train `model` in place on the dataset's train partition.

    Deterministic per cfg.seed: one Generator drives shuffling and dropout.
    Parameters are rounded to float32 precision once training ends.

    Raises:
        ValueError: Empty (or single-instance) train partition, shape mismatch
        NumericError: Loss or gradient became non-finite
    """
    cfg = cfg or TrainConfig()
    train = dataset.train
    if len(train) < 2:
        raise ValueError(f"Train partition needs at least 2 instances, has {len(train)}")
    if tuple(dataset.segment_shape) != tuple(model.input_shape):
        raise ValueError(f"Dataset segment shape {dataset.segment_shape} != model input {model.input_shape}")

    rng = np.random.default_rng(cfg.seed)
    adam = AdamState.for_params(model.params, learning_rate=cfg.learning_rate)
    history = TrainHistory()
    validation = dataset.validation
    start = time.time()
    training_logger.started("train_multilabel", model_id=model.model_id, train_size=len(train), **cfg.model_dump())

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train)) if cfg.shuffle else np.arange(len(train))
        losses = []
        for batch_number, index in enumerate(batch_indices(order, cfg.batch_size)):
            x = dataset.inputs(train, index)
            y = train.labels[index].astype(np.float64)
            probabilities, cache = model_forward(model, x, "train", rng, return_cache=True)
            loss = bce_loss(probabilities, y)
            if not np.isfinite(loss):
                raise NumericError(f"Training diverged: non-finite loss at epoch {epoch}, batch {batch_number}")
            grads = backward(model, cache, y)
            try:
                adam_step(model.params, grads, adam)
            except NumericError as e:
                raise NumericError(f"{e} (epoch {epoch}, batch {batch_number})") from e
            losses.append(loss * len(index))

        record = EpochRecord(epoch, float(np.sum(losses) / len(train)), None, None, None)
        if len(validation):
            record.validation_loss, record.validation_subset_accuracy, record.validation_label_accuracy = (
                evaluate_partition(model, dataset, validation))
        history.epochs.append(record)
        logger.info(
            f"epoch {epoch}/{cfg.epochs}: loss={record.train_loss:.5f} "
            f"val_subset_acc={record.validation_subset_accuracy}"
        )

    model.snap_to_float32()
    model.train_config = cfg.model_dump()
    model.model_id = f"cnn-{model.n_filters}f-{model.parameter_digest()}"
    training_logger.finished(
        "train_multilabel", elapsed_s=time.time() - start,
        model_id=model.model_id,
        final_loss=history.final.train_loss,
        final_val_subset_accuracy=history.final.validation_subset_accuracy,
    )
    return model, history
