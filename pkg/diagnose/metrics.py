"""
Precision, recall and accuracy from confusion counts.

When a denominator is zero both metrics follow one rule: 1 if FN == 0, else 0.
Precision with no predicted positives is therefore 1 only when nothing was
missed. Recall with no actual positives has FN == 0 and is always 1.
"""

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from errors import ShapeError
from siggen import COMPONENT_ORDER
from store import atomic_write_text

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Metrics:
    labels: Tuple[str, ...]
    tp: np.ndarray
    fp: np.ndarray
    tn: np.ndarray
    fn: np.ndarray
    subset_accuracy: float

    @property
    def count(self) -> int:
        return int(self.tp[0] + self.fp[0] + self.tn[0] + self.fn[0])

    @property
    def precision(self) -> List[float]:
        return [_ratio(tp, tp + fp, fn) for tp, fp, fn in zip(self.tp, self.fp, self.fn)]

    @property
    def recall(self) -> List[float]:
        return [_ratio(tp, tp + fn, fn) for tp, fn in zip(self.tp, self.fn)]

    @property
    def accuracy(self) -> List[float]:
        return [float(tp + tn) / self.count if self.count else 1.0 for tp, tn in zip(self.tp, self.tn)]

    def rows(self) -> List[dict]:
        rows = []
        for j, name in enumerate(self.labels):
            rows.append({
                "label": name,
                "tp": int(self.tp[j]),
                "fp": int(self.fp[j]),
                "tn": int(self.tn[j]),
                "fn": int(self.fn[j]),
                "precision": self.precision[j],
                "recall": self.recall[j],
                "accuracy": self.accuracy[j],
            })
        return rows

    def to_dict(self) -> dict:
        return {"count": self.count, "subset_accuracy": self.subset_accuracy, "labels": self.rows()}


def _ratio(numerator, denominator, missed) -> float:
    if denominator == 0:
        return 1.0 if missed == 0 else 0.0
    return float(numerator) / float(denominator)


def _as_label_matrix(values, name: str) -> np.ndarray:
    if isinstance(values, np.ndarray):
        matrix = values
    else:
        values = list(values)
        if values and hasattr(values[0], "verdicts"):
            matrix = np.stack([v.verdicts for v in values])
        else:
            matrix = np.asarray(values)
    if matrix.ndim == 1:
        matrix = matrix[:, np.newaxis]
    if matrix.size and not np.isin(matrix, (0, 1)).all():
        raise ValueError(f"{name} must be binary")
    return matrix.astype(np.int8)


def evaluate(predictions, truth, labels: Sequence[str] = COMPONENT_ORDER) -> Metrics:
    """Per-label confusion counts and derived metrics.

    Args:
        predictions: Diagnosis list or 0/1 matrix (n, k)
        truth: 0/1 matrix (n, k)
        labels: k label names

    Raises:
        ShapeError: Predictions and truth differ in length or label count
        ValueError: Non-binary values or no instances
    """
    predicted = _as_label_matrix(predictions, "predictions")
    actual = _as_label_matrix(truth, "truth")
    if predicted.shape[0] != actual.shape[0]:
        raise ShapeError(f"Length mismatch: {predicted.shape[0]} predictions vs {actual.shape[0]} truth rows")
    if predicted.shape != actual.shape or predicted.shape[1] != len(labels):
        raise ShapeError(f"Label count mismatch: predictions {predicted.shape}, truth {actual.shape}, "
                         f"{len(labels)} label names")
    if predicted.shape[0] == 0:
        raise ValueError("Nothing to evaluate")

    return Metrics(
        labels=tuple(labels),
        tp=((predicted == 1) & (actual == 1)).sum(axis=0),
        fp=((predicted == 1) & (actual == 0)).sum(axis=0),
        tn=((predicted == 0) & (actual == 0)).sum(axis=0),
        fn=((predicted == 0) & (actual == 1)).sum(axis=0),
        subset_accuracy=float(np.mean(np.all(predicted == actual, axis=1))),
    )


def evaluate_detection(anomalous, damaged) -> Metrics:
    """Stage-1 metrics with "damaged" as the positive class."""
    return evaluate(np.asarray(anomalous, dtype=np.int8), np.asarray(damaged, dtype=np.int8), labels=("damaged",))


def metrics_csv(metrics: Metrics) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=["label", "tp", "fp", "tn", "fn", "precision", "recall", "accuracy"],
                            lineterminator="\n")
    writer.writeheader()
    for row in metrics.rows():
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    writer.writerow({"label": "subset", "tp": "", "fp": "", "tn": "", "fn": "",
                     "precision": "", "recall": "", "accuracy": repr(metrics.subset_accuracy)})
    return buffer.getvalue()


def write_metrics_csv(metrics: Metrics, path: PathLike) -> Path:
    path = Path(path)
    atomic_write_text(path, metrics_csv(metrics))
    return path


def write_metrics_json(metrics: Metrics, path: PathLike, extra: dict = None) -> Path:
    path = Path(path)
    document = metrics.to_dict()
    if extra:
        document.update(extra)
    atomic_write_text(path, json.dumps(document, indent=2, sort_keys=True) + "\n")
    return path
