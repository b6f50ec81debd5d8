"""
Sensitivity sweeps: rerun the whole pipeline once per value of one setting.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Sequence

from config import RunConfig, derive_seed
from diagnose import run_experiment
from errors import ConfigError, UsageError
from nnet import check_input_shape
from siggen import COMPONENT_ORDER, RigProfile
from spectro import frame_geometry, frames_per_segment, resolution_table, retained_bins
from .artifacts import LABEL_COLUMNS

logger = logging.getLogger(__name__)

SWEEP_DIMENSIONS = ("window_s", "segment_duration_s", "batch_size", "log_amplitude", "architecture")
_TRUE = {"1", "true", "on", "yes"}
_FALSE = {"0", "false", "off", "no"}


@dataclass
class SweepReport:
    dimension: str
    values: List[Any]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    resolution: List[Dict[str, float]] = field(default_factory=list)


def _parse_one(dimension: str, raw: str):
    text = raw.strip().lower()
    if dimension in ("window_s", "segment_duration_s"):
        value = float(Fraction(text))
        if value <= 0:
            raise ValueError("must be positive")
        return value
    if dimension == "batch_size":
        value = int(text)
        if value < 1:
            raise ValueError("must be >= 1")
        return value
    if dimension == "log_amplitude":
        if text in _TRUE:
            return True
        if text in _FALSE:
            return False
        raise ValueError("must be on/off")
    value = int(text.removesuffix("-filter"))
    if value < 1:
        raise ValueError("must be >= 1")
    return value


def parse_sweep_values(dimension: str, raw_values: Sequence[str]) -> List[Any]:
    """Parse and check sweep values; fractions such as 1/60 are accepted for durations.

    Raises:
        UsageError: Unknown dimension or fewer than two values
        ConfigError: A value is invalid for the dimension
    """
    if dimension not in SWEEP_DIMENSIONS:
        raise UsageError(f"Invalid sweep dimension '{dimension}'. Must be one of: {list(SWEEP_DIMENSIONS)}")
    if len(raw_values) < 2:
        raise UsageError(f"A sweep needs at least 2 values, got {len(raw_values)}")
    values = []
    for raw in raw_values:
        try:
            values.append(_parse_one(dimension, raw))
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigError(f"Invalid {dimension} value '{raw}': {e}", fields=[dimension])
    return values


def apply_value(cfg: RunConfig, dimension: str, value) -> RunConfig:
    """Copy of cfg with one setting replaced and a seed derived from it."""
    seed = derive_seed(cfg.master_seed, f"sweep/{dimension}/{value}")
    if dimension == "window_s":
        stft = cfg.stft.model_copy(update={"window_s": value, "hop_s": min(cfg.stft.hop_s, value)})
        updated = cfg.model_copy(update={"stft": stft})
    elif dimension == "log_amplitude":
        updated = cfg.model_copy(update={"stft": cfg.stft.model_copy(update={"log_amplitude": value})})
    elif dimension == "segment_duration_s":
        updated = cfg.model_copy(update={"dataset": cfg.dataset.model_copy(update={"segment_duration_s": value})})
    elif dimension == "batch_size":
        updated = cfg.model_copy(update={"train": cfg.train.model_copy(update={"batch_size": value})})
    else:
        updated = cfg.model_copy(update={"stage1": cfg.stage1.model_copy(update={"n_filters": value})})
    return updated.model_copy(update={"master_seed": seed})


def check_runnable(cfg: RunConfig, rig: RigProfile, dimension: str, value):
    """Refuse a sweep value before any run whose segments the CNN could not consume."""
    try:
        frame_geometry(cfg.stft, rig.sample_rate_hz)
        frames = frames_per_segment(cfg.stft, cfg.dataset.segment_duration_s)
        bins = retained_bins(cfg.stft, rig.sample_rate_hz)
        channels = 1 if cfg.stage1.per_channel else len(COMPONENT_ORDER)
        check_input_shape((frames, bins, channels))
    except ValueError as e:
        raise ConfigError(f"{dimension}={value} cannot run: {e}", fields=[dimension])
    if cfg.dataset.segment_duration_s > cfg.dataset.signal_duration_s:
        raise ConfigError(f"{dimension}={value}: segment longer than the {cfg.dataset.signal_duration_s} s signal",
                          fields=[dimension])


def run_sweep(
    cfg: RunConfig,
    rig: RigProfile,
    dimension: str,
    values: Sequence[Any],
    resolution_only: bool = False,
) -> SweepReport:
    """Validate every value, then run each (unless resolution_only).

    For window_s the report also carries the frequency/time resolution table.
    """
    report = SweepReport(dimension=dimension, values=list(values))
    if dimension == "window_s":
        report.resolution = resolution_table(values, rig.sample_rate_hz)
    if resolution_only:
        if dimension != "window_s":
            raise UsageError("--resolution-only applies to the window_s dimension")
        return report

    configs = [apply_value(cfg, dimension, v) for v in values]
    for run_cfg, value in zip(configs, values):
        check_runnable(run_cfg, rig, dimension, value)

    for run_cfg, value in zip(configs, values):
        logger.info(f"sweep {dimension}={value} (seed {run_cfg.master_seed})")
        result = run_experiment(run_cfg, rig)
        row = {
            "dimension": dimension,
            "value": value,
            "seed": run_cfg.master_seed,
            "stage1_precision": result.stage1_metrics.precision[0],
            "stage1_recall": result.stage1_metrics.recall[0],
            "stage2_subset_accuracy": result.stage2_metrics.subset_accuracy,
        }
        for name, accuracy in zip(LABEL_COLUMNS, result.stage2_metrics.accuracy):
            row[f"accuracy_{name}"] = accuracy
        row["elapsed_s"] = round(result.elapsed_s, 3)
        report.rows.append(row)
    return report
