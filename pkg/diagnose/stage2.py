"""
Stage 2: multi-label fault-type diagnosis with the small CNN.
"""

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import List, Optional, Tuple

import numpy as np

from errors import ClassPresenceError, FingerprintMismatchError
from nnet import CnnModel, TrainConfig, TrainHistory, init_model, predict_probabilities, train_multilabel
from siggen import COMPONENT_ORDER
from spectro import LabeledDataset, SpectrogramSegment
from .data import SegmentBatch
from .stage1 import Stage1Model, stage1_score_batch

DECISION_THRESHOLD = 0.5


@dataclass(frozen=True)
class Diagnosis:
    probabilities: np.ndarray
    segment_id: Optional[str] = None
    signed_score: Optional[float] = None
    components: Tuple[str, ...] = COMPONENT_ORDER
    created_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    @property
    def verdicts(self) -> np.ndarray:
        return (self.probabilities >= DECISION_THRESHOLD).astype(np.int8)

    @property
    def damaged_components(self) -> List[str]:
        return [name for name, v in zip(self.components, self.verdicts) if v]

    @property
    def stage1_anomalous(self) -> Optional[bool]:
        return None if self.signed_score is None else self.signed_score < 0

    def to_dict(self) -> dict:
        return {
            "segment_id": self.segment_id,
            "probabilities": [float(p) for p in self.probabilities],
            "verdicts": [int(v) for v in self.verdicts],
            "signed_score": self.signed_score,
            "created_at": self.created_at,
        }


def check_class_presence(dataset: LabeledDataset, partition: str = "train"):
    """Every label column must hold both classes before stage 2 can learn it."""
    labels = dataset.partition(partition).labels
    problems = []
    for j, name in enumerate(COMPONENT_ORDER):
        positives = int(labels[:, j].sum()) if labels.size else 0
        negatives = labels.shape[0] - positives
        if positives == 0 or negatives == 0:
            problems.append(f"{name}: {positives} damaged / {negatives} healthy")
    if problems:
        raise ClassPresenceError(
            "Fault-type diagnosis needs both healthy and damaged observations of every component "
            f"in the {partition} partition; stage 2 is applicable only when sufficient fault observations "
            f"are available. Missing a class: {'; '.join(problems)}"
        )


def stage2_train(
    dataset: LabeledDataset,
    cfg: Optional[TrainConfig] = None,
    n_filters: int = 4,
    dropout_rate: float = 0.10,
    init_seed: Optional[int] = None,
) -> Tuple[CnnModel, TrainHistory]:
    """Initialize and train the multi-label classifier.

    Raises:
        ClassPresenceError: A label column lacks healthy or damaged instances
    """
    cfg = cfg or TrainConfig()
    check_class_presence(dataset)
    model = init_model(dataset.segment_shape, n_filters,
                       seed=cfg.seed if init_seed is None else init_seed,
                       dropout_rate=dropout_rate)
    model, history = train_multilabel(model, dataset, cfg)
    model.fingerprint = dataset.fingerprint
    return model, history


def _check_fingerprint(model: CnnModel, fingerprint: str):
    if model.fingerprint and fingerprint and model.fingerprint != fingerprint:
        raise FingerprintMismatchError(
            f"Segment preprocessing {fingerprint} does not match the stage-2 model ({model.fingerprint})")


def stage2_diagnose(model: CnnModel, segment: SpectrogramSegment, segment_id: Optional[str] = None) -> Diagnosis:
    """Label probabilities and 0.5-threshold verdicts for one stacked segment.

    Raises:
        ShapeError: Segment shape differs from the model input
        FingerprintMismatchError: Segment built with other preprocessing
    """
    _check_fingerprint(model, segment.fingerprint)
    probabilities = predict_probabilities(model, [segment])[0]
    return Diagnosis(probabilities=probabilities, segment_id=segment_id)


def diagnose_batch(
    model: CnnModel,
    batch: SegmentBatch,
    stage1: Optional[Stage1Model] = None,
) -> List[Diagnosis]:
    """Diagnose every instance; attach stage-1 signed scores when a detector is given."""
    _check_fingerprint(model, batch.fingerprint)
    probabilities = predict_probabilities(model, batch.inputs)
    signed = None if stage1 is None else stage1_score_batch(stage1, batch).signed
    created_at = datetime.now(timezone.utc).isoformat()
    return [
        Diagnosis(
            probabilities=probabilities[i],
            segment_id=batch.ids[i],
            signed_score=None if signed is None else float(signed[i]),
            created_at=created_at,
        )
        for i in range(len(batch))
    ]
