"""
Stage 1: one-class anomaly detection.

Features come from a conv -> pool -> batchnorm front end and an isolation
forest is fit on features of healthy instances only. Two extractor modes:
"random" (seeded random filters, batchnorm statistics set to the healthy
population) and "stage2" (the front end of a trained stage-2 classifier).
"""

import copy
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from config import EXTRACTOR_MODES, ForestParams, derive_seed
from errors import FingerprintMismatchError, OneClassViolationError, ShapeError
from iforest import IsolationForest, ScoreBatch, fit_forest, score_batch
from logging_config import anomaly_logger
from nnet import CnnModel, conv2d_forward, feature_matrix, init_model, maxpool2x2
from spectro import SpectrogramSegment
from .data import SegmentBatch

_CALIBRATION_BATCH = 64


@dataclass
class Stage1Model:
    extractor_mode: str
    extractors: List[CnnModel]
    forests: List[IsolationForest]
    fingerprint: str
    per_channel: bool = False

    @property
    def input_shape(self):
        height, width, channels = self.extractors[0].input_shape
        return (height, width, len(self.extractors)) if self.per_channel else (height, width, channels)


@dataclass(frozen=True)
class Detection:
    signed: float
    is_anomalous: bool
    s: float
    mean_path_length: float
    channel_signed: Optional[List[float]] = None


@dataclass(frozen=True)
class Stage1Scores:
    """Per-instance stage-1 results; per-channel models report the worst channel."""
    signed: np.ndarray
    s: np.ndarray
    mean_path_length: np.ndarray
    channel_signed: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(self.signed.shape[0])

    @property
    def anomalous(self) -> np.ndarray:
        return self.signed < 0


def calibrate_batchnorm(model: CnnModel, inputs: np.ndarray, batch_size: int = _CALIBRATION_BATCH) -> CnnModel:
    """Set running statistics to the exact per-filter mean and biased variance of
    the pooled conv activations over `inputs`; gamma = 1, beta = 0."""
    p = model.params

    def pooled(chunk):
        out, _ = maxpool2x2(conv2d_forward(chunk, p["conv_w"], p["conv_b"]))
        return out

    n = inputs.shape[0]
    total = np.zeros(model.n_filters)
    count = 0
    for start in range(0, n, batch_size):
        block = pooled(inputs[start:start + batch_size])
        total += block.sum(axis=(0, 1, 2))
        count += block.shape[0] * block.shape[1] * block.shape[2]
    mean = total / count
    squares = np.zeros(model.n_filters)
    for start in range(0, n, batch_size):
        block = pooled(inputs[start:start + batch_size])
        squares += ((block - mean) ** 2).sum(axis=(0, 1, 2))

    model.running_mean = mean
    model.running_var = squares / count
    model.params["bn_gamma"] = np.ones(model.n_filters)
    model.params["bn_beta"] = np.zeros(model.n_filters)
    model.snap_to_float32()
    return model


def _healthy_batch(segments: Union[SegmentBatch, Sequence[SpectrogramSegment]]) -> SegmentBatch:
    batch = segments if isinstance(segments, SegmentBatch) else SegmentBatch.from_segments(segments)
    if len(batch) < 2:
        raise ValueError(f"Stage 1 needs at least 2 healthy training instances, got {len(batch)}")
    damaged = np.flatnonzero(batch.labels.any(axis=1))
    if damaged.size:
        raise OneClassViolationError(
            f"Stage 1 trains on healthy data only; {damaged.size} of {len(batch)} instances carry a "
            f"damaged label (first: {batch.ids[int(damaged[0])]})"
        )
    return batch


def stage1_train(
    segments: Union[SegmentBatch, Sequence[SpectrogramSegment]],
    extractor_mode: str = "random",
    forest: Optional[ForestParams] = None,
    seed: int = 0,
    n_filters: int = 16,
    stage2_model: Optional[CnnModel] = None,
    per_channel: bool = False,
) -> Stage1Model:
    """Fit the stage-1 detector on healthy instances.

    Raises:
        OneClassViolationError: Any instance labeled damaged
        ValueError: Unknown extractor mode, missing stage-2 model, or
            per-channel mode combined with a stage-2 extractor
        ShapeError / FingerprintMismatchError: stage-2 extractor incompatible
    """
    if extractor_mode not in EXTRACTOR_MODES:
        raise ValueError(f"Invalid extractor mode '{extractor_mode}'. Must be one of: {list(EXTRACTOR_MODES)}")
    forest = forest or ForestParams()
    batch = _healthy_batch(segments)
    height, width, channels = batch.segment_shape

    start = time.time()
    anomaly_logger.started(
        "stage1_train", extractor_mode=extractor_mode, per_channel=per_channel,
        training_size=len(batch), n_filters=n_filters,
    )

    if extractor_mode == "stage2":
        if stage2_model is None:
            raise ValueError("Extractor mode 'stage2' needs a trained stage-2 model")
        if per_channel:
            raise ValueError("Per-channel stage 1 needs single-channel extractors; use extractor mode 'random'")
        if tuple(stage2_model.input_shape) != (height, width, channels):
            raise ShapeError(f"Stage-2 model input {stage2_model.input_shape} != segment shape {batch.segment_shape}")
        if stage2_model.fingerprint and stage2_model.fingerprint != batch.fingerprint:
            raise FingerprintMismatchError(
                f"Stage-2 model preprocessing {stage2_model.fingerprint} != segments {batch.fingerprint}")
        extractors = [copy.deepcopy(stage2_model)]
        views = [batch.inputs]
    elif per_channel:
        base = init_model((height, width, 1), n_filters, seed=derive_seed(seed, "stage1/extractor"))
        extractors = [copy.deepcopy(base) for _ in range(channels)]
        views = [batch.inputs[..., j:j + 1] for j in range(channels)]
    else:
        extractors = [init_model((height, width, channels), n_filters, seed=derive_seed(seed, "stage1/extractor"))]
        views = [batch.inputs]

    forests = []
    for j, (extractor, view) in enumerate(zip(extractors, views)):
        if extractor_mode == "random":
            calibrate_batchnorm(extractor, view)
        extractor.fingerprint = batch.fingerprint
        features = feature_matrix(extractor, view)
        forests.append(fit_forest(
            features,
            n_trees=forest.n_trees,
            subsample_size=forest.subsample_size,
            contamination=forest.contamination,
            seed=derive_seed(seed, f"stage1/forest/{j}"),
            height_limit=forest.height_limit,
            n_jobs=forest.n_jobs,
        ))

    model = Stage1Model(
        extractor_mode=extractor_mode,
        extractors=extractors,
        forests=forests,
        fingerprint=batch.fingerprint,
        per_channel=per_channel,
    )
    training = stage1_score_batch(model, batch)
    anomaly_logger.finished(
        "stage1_train", elapsed_s=time.time() - start,
        training_anomalies=int(training.anomalous.sum()),
        min_training_signed=float(training.signed.min()),
    )
    return model


def _check_compatible(model: Stage1Model, batch: SegmentBatch):
    if batch.fingerprint != model.fingerprint:
        raise FingerprintMismatchError(
            f"Segment preprocessing {batch.fingerprint} does not match the stage-1 model ({model.fingerprint})")
    if tuple(batch.segment_shape) != tuple(model.input_shape):
        raise ShapeError(f"Segment shape {batch.segment_shape} != stage-1 input {model.input_shape}")


def stage1_score_batch(model: Stage1Model, batch: SegmentBatch) -> Stage1Scores:
    _check_compatible(model, batch)
    if not model.per_channel:
        result: ScoreBatch = score_batch(model.forests[0], feature_matrix(model.extractors[0], batch.inputs))
        return Stage1Scores(result.signed, result.s, result.mean_path_length)

    per_channel = [
        score_batch(forest, feature_matrix(extractor, batch.inputs[..., j:j + 1]))
        for j, (extractor, forest) in enumerate(zip(model.extractors, model.forests))
    ]
    signed = np.stack([r.signed for r in per_channel], axis=1)
    return Stage1Scores(
        signed=signed.min(axis=1),
        s=np.stack([r.s for r in per_channel], axis=1).max(axis=1),
        mean_path_length=np.stack([r.mean_path_length for r in per_channel], axis=1).min(axis=1),
        channel_signed=signed,
    )


def stage1_detect(model: Stage1Model, segment: SpectrogramSegment) -> Detection:
    """Signed score and verdict for one stacked segment (anomalous iff signed < 0).

    Raises:
        FingerprintMismatchError: Segment built with other preprocessing
    """
    batch = SegmentBatch.from_segments([segment])
    scores = stage1_score_batch(model, batch)
    return Detection(
        signed=float(scores.signed[0]),
        is_anomalous=bool(scores.anomalous[0]),
        s=float(scores.s[0]),
        mean_path_length=float(scores.mean_path_length[0]),
        channel_signed=None if scores.channel_signed is None else scores.channel_signed[0].tolist(),
    )
