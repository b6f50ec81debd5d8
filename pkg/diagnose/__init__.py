"""
Two-stage diagnosis: healthy-only anomaly detection, then multi-label
fault-type classification, with metrics and bundle persistence.
"""

from .data import SegmentBatch, build_pools, signals_from_files, stage1_dataset, stage2_dataset
from .experiment import SCORE_PANELS, ExperimentResult, ScoreRow, run_experiment, score_rows
from .metrics import (
    Metrics,
    evaluate,
    evaluate_detection,
    metrics_csv,
    write_metrics_csv,
    write_metrics_json,
)
from .pipeline import PipelineBundle, load_pipeline, read_pipeline_manifest, save_pipeline
from .stage1 import Detection, Stage1Model, Stage1Scores, calibrate_batchnorm, stage1_detect, stage1_score_batch, stage1_train
from .stage2 import (
    DECISION_THRESHOLD,
    Diagnosis,
    check_class_presence,
    diagnose_batch,
    stage2_diagnose,
    stage2_train,
)

__all__ = [
    "DECISION_THRESHOLD",
    "SCORE_PANELS",
    "Detection",
    "Diagnosis",
    "ExperimentResult",
    "Metrics",
    "PipelineBundle",
    "ScoreRow",
    "SegmentBatch",
    "Stage1Model",
    "Stage1Scores",
    "build_pools",
    "calibrate_batchnorm",
    "check_class_presence",
    "diagnose_batch",
    "evaluate",
    "evaluate_detection",
    "load_pipeline",
    "metrics_csv",
    "read_pipeline_manifest",
    "run_experiment",
    "save_pipeline",
    "score_rows",
    "signals_from_files",
    "stage1_dataset",
    "stage1_detect",
    "stage1_score_batch",
    "stage1_train",
    "stage2_dataset",
    "stage2_diagnose",
    "stage2_train",
    "write_metrics_csv",
    "write_metrics_json",
]
