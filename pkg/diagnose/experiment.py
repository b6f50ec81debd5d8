"""
One end-to-end run: synthetic pools -> both datasets -> stage 2 -> stage 1
-> scores and metrics. Shared by the demo and sweep commands.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from config import RunConfig, derive_seed
from nnet import TrainHistory
from siggen import RigProfile
from spectro import LabeledDataset, preprocessing_fingerprint
from .data import SegmentBatch, build_pools, stage1_dataset, stage2_dataset
from .metrics import Metrics, evaluate, evaluate_detection
from .pipeline import PipelineBundle
from .stage1 import Stage1Scores, stage1_score_batch, stage1_train
from .stage2 import diagnose_batch, stage2_train

logger = logging.getLogger(__name__)

SCORE_PANELS = ("train-healthy", "test-healthy", "test-damaged")


@dataclass(frozen=True)
class ScoreRow:
    split: str
    index: str
    truth: str
    s: float
    signed: float
    mean_path_length: float

    @property
    def anomalous(self) -> bool:
        return self.signed < 0

    @property
    def panel(self) -> str:
        return f"{'train' if self.split == 'train' else 'test'}-{self.truth}"


@dataclass
class ExperimentResult:
    bundle: PipelineBundle
    stage1_metrics: Metrics
    stage2_metrics: Metrics
    history: TrainHistory
    scores: List[ScoreRow]
    datasets: Dict[str, LabeledDataset] = field(default_factory=dict)
    elapsed_s: float = 0.0

    def summary(self) -> dict:
        return {
            "stage1": {
                "precision": self.stage1_metrics.precision[0],
                "recall": self.stage1_metrics.recall[0],
                "accuracy": self.stage1_metrics.accuracy[0],
            },
            "stage2": {
                "label_accuracy": dict(zip(self.stage2_metrics.labels, self.stage2_metrics.accuracy)),
                "subset_accuracy": self.stage2_metrics.subset_accuracy,
            },
            "elapsed_s": round(self.elapsed_s, 3),
        }


def score_rows(split: str, batch: SegmentBatch, scores: Stage1Scores) -> List[ScoreRow]:
    rows = []
    for i in range(len(batch)):
        rows.append(ScoreRow(
            split=split,
            index=batch.ids[i],
            truth="damaged" if batch.labels[i].any() else "healthy",
            s=float(scores.s[i]),
            signed=float(scores.signed[i]),
            mean_path_length=float(scores.mean_path_length[i]),
        ))
    return rows


def run_experiment(cfg: RunConfig, rig: RigProfile, pools: Optional[Dict] = None) -> ExperimentResult:
    """Run both stages on synthetic data generated from `rig` under `cfg`."""
    start = time.time()
    seed = cfg.master_seed
    if pools is None:
        pools = build_pools(rig, cfg.stft, cfg.dataset, seed)
    data2 = stage2_dataset(pools, cfg.dataset, cfg.stft, seed)
    data1 = stage1_dataset(pools, cfg.dataset, cfg.stft, seed)

    train_cfg = cfg.train.model_copy(update={"seed": derive_seed(seed, f"stage2/train/{cfg.train.seed}")})
    stage2, history = stage2_train(data2, train_cfg, n_filters=cfg.stage2_filters, dropout_rate=cfg.dropout_rate,
                                   init_seed=derive_seed(seed, "stage2/init"))

    train_batch = SegmentBatch.from_partition(data1, "train")
    healthy = train_batch.select(~train_batch.labels.any(axis=1))
    stage1 = stage1_train(
        healthy,
        extractor_mode=cfg.stage1.extractor,
        forest=cfg.forest,
        seed=seed,
        n_filters=cfg.stage1.n_filters,
        stage2_model=stage2,
        per_channel=cfg.stage1.per_channel,
    )

    test1 = SegmentBatch.from_partition(data1, "test")
    test_scores = stage1_score_batch(stage1, test1)
    scores = score_rows("train", healthy, stage1_score_batch(stage1, healthy)) + score_rows("test", test1, test_scores)
    stage1_metrics = evaluate_detection(test_scores.anomalous.astype(np.int8), test1.labels.any(axis=1).astype(np.int8))

    test2 = SegmentBatch.from_partition(data2, "test")
    stage2_metrics = evaluate(diagnose_batch(stage2, test2), test2.labels)

    fingerprint = preprocessing_fingerprint(cfg.stft, rig.sample_rate_hz, cfg.dataset.segment_duration_s)
    bundle = PipelineBundle(
        fingerprint=fingerprint,
        stage1=stage1,
        stage2=stage2,
        preprocessing={
            "stft": cfg.stft.model_dump(),
            "sample_rate_hz": rig.sample_rate_hz,
            "segment_duration_s": cfg.dataset.segment_duration_s,
        },
        run={"master_seed": seed},
    )
    result = ExperimentResult(
        bundle=bundle,
        stage1_metrics=stage1_metrics,
        stage2_metrics=stage2_metrics,
        history=history,
        scores=scores,
        datasets={"stage1": data1, "stage2": data2},
        elapsed_s=time.time() - start,
    )
    logger.info(f"experiment seed={seed}: {result.summary()}")
    return result
