"""
Subcommand implementations. Each takes the parsed arguments and the loaded
RunConfig, writes its artifacts atomically and prints a short JSON summary
to stdout.
"""

import json
import logging
import platform
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from config import RunConfig, derive_seed, run_config_schema
from diagnose import (
    PipelineBundle,
    SegmentBatch,
    build_pools,
    diagnose_batch,
    evaluate,
    evaluate_detection,
    load_pipeline,
    run_experiment,
    save_pipeline,
    score_rows,
    signals_from_files,
    stage1_dataset,
    stage1_score_batch,
    stage1_train,
    stage2_dataset,
    stage2_train,
    write_metrics_csv,
    write_metrics_json,
)
from errors import DataFormatError, ShapeError, UsageError
from siggen import Health, RigProfile, default_rig, generate_rig_signals, load_rig_profile, load_timeseries
from spectro import (
    archive_kind,
    load_dataset,
    load_segments,
    load_spectrogram,
    save_dataset,
    save_spectrogram,
    stack_channels,
    stft,
)
from spectro.archive import DATASET_FORMAT, SEGMENTS_FORMAT, SPECTROGRAM_FORMAT
from store import atomic_write_text
from . import artifacts, render
from .sweep import parse_sweep_values, run_sweep

logger = logging.getLogger(__name__)


def _emit(summary: dict):
    print(json.dumps(summary, indent=2, default=str))


def _rig(args, cfg: RunConfig) -> RigProfile:
    path = getattr(args, "rig", None) or cfg.rig
    return load_rig_profile(path) if path else default_rig()


def _preprocessing(dataset) -> dict:
    return {
        "stft": None if dataset.stft_config is None else dataset.stft_config.model_dump(),
        "sample_rate_hz": dataset.sample_rate_hz,
        "segment_duration_s": dataset.duration_s,
    }


def _versions() -> dict:
    try:
        package = metadata.version("geardiag")
    except metadata.PackageNotFoundError:
        package = "unknown"
    return {"geardiag": package, "python": platform.python_version(), "numpy": np.__version__}


def cmd_generate(args, cfg: RunConfig):
    rig = _rig(args, cfg)
    duration = args.duration or cfg.dataset.signal_duration_s
    out = Path(args.out or Path(cfg.paths.data_dir) / "signals")
    signals = generate_rig_signals(rig, duration, derive_seed(cfg.master_seed, "signals"))
    index = artifacts.write_signal_set(signals, out, args.format)
    _emit({"signals": len(signals), "duration_s": duration, "index": str(index)})


def cmd_spectrogram(args, cfg: RunConfig):
    if args.signals:
        series = artifacts.read_signal_set(args.signals)
        out_dir = Path(args.out or Path(cfg.paths.data_dir) / "spectrograms")
        written = []
        for ts in series:
            path = out_dir / f"{artifacts.component_slug(ts.channel)}_{ts.health}.json"
            save_spectrogram(stft(ts, cfg.stft), path)
            written.append(str(path))
        _emit({"spectrograms": written})
        return
    if not (args.input and args.sample_rate and args.out):
        raise UsageError("spectrogram needs --signals, or --input with --sample-rate and --out")
    ts = load_timeseries(args.input, args.format, args.sample_rate,
                         channel=args.channel, health=Health(args.health))
    spec = stft(ts, cfg.stft)
    save_spectrogram(spec, args.out)
    _emit({"spectrogram": args.out, "frames": spec.n_frames, "bins": spec.n_bins})


def cmd_build_dataset(args, cfg: RunConfig):
    rig = _rig(args, cfg)
    signals = signals_from_files(artifacts.read_signal_set(args.signals)) if args.signals else None
    pools = build_pools(rig, cfg.stft, cfg.dataset, cfg.master_seed, signals=signals)
    build = stage1_dataset if args.stage == 1 else stage2_dataset
    dataset = build(pools, cfg.dataset, cfg.stft, cfg.master_seed)
    out = Path(args.out or Path(cfg.paths.data_dir) / f"dataset_stage{args.stage}.json")
    save_dataset(dataset, out)
    _emit({"dataset": str(out), "stage": args.stage, **dataset.report.to_dict()})


def cmd_train_stage1(args, cfg: RunConfig):
    dataset = load_dataset(args.dataset)
    train = SegmentBatch.from_partition(dataset, "train")
    healthy = train.select(~train.labels.any(axis=1))
    logger.info(f"stage 1 trains on {len(healthy)} healthy of {len(train)} train instances")
    extractor = args.extractor or cfg.stage1.extractor
    stage2_model = load_pipeline(args.stage2_model).require("stage2") if args.stage2_model else None
    model = stage1_train(
        healthy,
        extractor_mode=extractor,
        forest=cfg.forest,
        seed=cfg.master_seed,
        n_filters=args.filters or cfg.stage1.n_filters,
        stage2_model=stage2_model,
        per_channel=args.per_channel or cfg.stage1.per_channel,
    )
    out = Path(args.out or Path(cfg.paths.model_dir) / "stage1")
    save_pipeline(PipelineBundle(fingerprint=dataset.fingerprint, stage1=model,
                                 preprocessing=_preprocessing(dataset),
                                 run={"master_seed": cfg.master_seed}), out)
    scores = stage1_score_batch(model, healthy)
    _emit({"bundle": str(out), "training_size": len(healthy),
           "training_anomalies": int(scores.anomalous.sum())})


def _stack_single_channel(segments):
    """Group single-channel segments in threes into stacked instances."""
    if len(segments) % 3:
        raise ShapeError(f"{len(segments)} single-channel segments do not group into 3-channel instances")
    return [stack_channels(segments[i:i + 3]) for i in range(0, len(segments), 3)]


def _instances(args):
    """(split name, SegmentBatch) pairs from --dataset/--splits or --segments."""
    if args.segments:
        segments = load_segments(args.segments)
        if segments[0].magnitudes.shape[2] == 1:
            segments = _stack_single_channel(segments)
        return [("input", SegmentBatch.from_segments(segments))]
    if not args.dataset:
        raise UsageError("Give --dataset or --segments")
    dataset = load_dataset(args.dataset)
    splits = [s.strip() for s in args.splits.split(",") if s.strip()]
    return [(name, SegmentBatch.from_partition(dataset, name)) for name in splits]


def cmd_detect(args, cfg: RunConfig):
    model = load_pipeline(args.model).require("stage1")
    rows = []
    for split, batch in _instances(args):
        if split == "train":
            batch = batch.select(~batch.labels.any(axis=1))
        rows.extend(score_rows(split, batch, stage1_score_batch(model, batch)))
    out = Path(args.out or Path(cfg.paths.report_dir) / "scores.csv")
    artifacts.write_scores(rows, out)
    _emit({"scores": str(out), "instances": len(rows), "anomalous": sum(r.anomalous for r in rows)})


def cmd_train_stage2(args, cfg: RunConfig):
    dataset = load_dataset(args.dataset)
    updates = {k: v for k, v in (("epochs", args.epochs), ("batch_size", args.batch_size)) if v}
    train_cfg = cfg.train.model_copy(update=updates)
    model, history = stage2_train(dataset, train_cfg, n_filters=args.filters or cfg.stage2_filters,
                                  dropout_rate=cfg.dropout_rate)
    out = Path(args.out or Path(cfg.paths.model_dir) / "stage2")
    save_pipeline(PipelineBundle(fingerprint=dataset.fingerprint, stage2=model,
                                 preprocessing=_preprocessing(dataset),
                                 run={"master_seed": cfg.master_seed, "train": train_cfg.model_dump()}), out)
    history_path = Path(args.history or Path(cfg.paths.report_dir) / "stage2_history.json")
    atomic_write_text(history_path, json.dumps(history.to_dict(), indent=2) + "\n")
    _emit({"bundle": str(out), "history": str(history_path), "final": history.to_dict()["epochs"][-1]})


def cmd_classify(args, cfg: RunConfig):
    bundle = load_pipeline(args.model)
    model = bundle.require("stage2")
    stage1 = bundle.stage1
    if args.stage1_model:
        stage1 = load_pipeline(args.stage1_model).require("stage1")
    diagnoses, ids, truth = [], [], []
    for _, batch in _instances(args):
        diagnoses.extend(diagnose_batch(model, batch, stage1))
        ids.extend(batch.ids)
        truth.append(batch.labels)
    out = Path(args.out or Path(cfg.paths.report_dir) / "predictions.csv")
    artifacts.write_predictions(diagnoses, out)
    summary = {"predictions": str(out), "instances": len(diagnoses)}
    if args.truth_out:
        artifacts.write_truth(ids, np.concatenate(truth), args.truth_out)
        summary["truth"] = args.truth_out
    _emit(summary)


def cmd_evaluate(args, cfg: RunConfig):
    if args.scores:
        rows = [r for r in artifacts.read_scores(args.scores) if not args.split or r.split == args.split]
        if not rows:
            raise DataFormatError(f"{args.scores}: no rows for split {args.split!r}", path=args.scores)
        metrics = evaluate_detection([int(r.anomalous) for r in rows], [int(r.truth == "damaged") for r in rows])
    elif args.predictions and args.truth:
        predicted_ids, predicted = artifacts.read_label_file(args.predictions)
        truth_ids, truth = artifacts.read_label_file(args.truth)
        if len(predicted_ids) != len(truth_ids):
            raise ShapeError(f"Length mismatch: {len(predicted_ids)} predictions ({args.predictions}) vs "
                             f"{len(truth_ids)} truth rows ({args.truth})")
        for k, (a, b) in enumerate(zip(predicted_ids, truth_ids)):
            if a != b:
                raise DataFormatError(f"Row {k + 2}: prediction id {a!r} does not match truth id {b!r}")
        metrics = evaluate(predicted, truth)
    else:
        raise UsageError("evaluate needs --scores, or both --predictions and --truth")
    out = Path(args.out or Path(cfg.paths.report_dir) / "metrics.csv")
    write_metrics_csv(metrics, out)
    if args.json:
        write_metrics_json(metrics, args.json)
    _emit({"metrics": str(out), **metrics.to_dict()})


def cmd_sweep(args, cfg: RunConfig):
    rig = _rig(args, cfg)
    values = parse_sweep_values(args.dimension, args.values.split(","))
    report = run_sweep(cfg, rig, args.dimension, values, resolution_only=args.resolution_only)
    out = Path(args.out or Path(cfg.paths.report_dir) / f"sweep_{args.dimension}")
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    if report.rows:
        header = list(report.rows[0])
        atomic_write_text(out / "sweep.csv", artifacts.csv_text(header, [[row[k] for k in header] for row in report.rows]))
        written["sweep"] = str(out / "sweep.csv")
    if report.resolution:
        header = list(report.resolution[0])
        atomic_write_text(out / "resolution.csv",
                          artifacts.csv_text(header, [[repr(row[k]) for k in header] for row in report.resolution]))
        written["resolution"] = str(out / "resolution.csv")
    _emit({"dimension": args.dimension, "values": values, **written, "rows": report.rows})


def cmd_render(args, cfg: RunConfig):
    source = Path(args.input)
    out = Path(args.out) if args.out else source.with_suffix(".svg")
    if source.suffix == ".csv":
        svg, table = render.render_scores(artifacts.read_scores(source), out)
    else:
        kind = archive_kind(source)
        if kind == SPECTROGRAM_FORMAT:
            svg, table = render.render_spectrogram(load_spectrogram(source), out, args.interval_s)
        elif kind == SEGMENTS_FORMAT:
            segments = load_segments(source)
            if not 0 <= args.index < len(segments):
                raise UsageError(f"--index {args.index} outside 0..{len(segments) - 1}")
            svg, table = render.render_segment(segments[args.index], out)
        elif kind == DATASET_FORMAT:
            dataset = load_dataset(source)
            part = dataset.partition(args.split)
            if not 0 <= args.index < len(part):
                raise UsageError(f"--index {args.index} outside 0..{len(part) - 1} of split {args.split}")
            segment = dataset.segment(part, args.index)
            svg, table = render.render_segment(segment, out, title=f"{args.split} #{int(part.instance_ids[args.index])}")
        else:
            raise DataFormatError(f"{source}: unknown artifact type {kind!r}", path=str(source))
    _emit({"image": str(svg), "values": str(table)})


def cmd_demo(args, cfg: RunConfig):
    rig = _rig(args, cfg)
    start = time.time()
    result = run_experiment(cfg, rig)
    out = Path(args.out or Path(cfg.paths.report_dir) / "demo")
    out.mkdir(parents=True, exist_ok=True)

    save_pipeline(result.bundle, out / "pipeline")
    artifacts.write_scores(result.scores, out / "scores.csv")
    render.render_scores(result.scores, out / "scores.svg")
    write_metrics_csv(result.stage1_metrics, out / "stage1_metrics.csv")
    write_metrics_csv(result.stage2_metrics, out / "stage2_metrics.csv")
    report = {
        "config": cfg.model_dump(mode="json"),
        "master_seed": cfg.master_seed,
        "versions": _versions(),
        "wall_clock_s": round(time.time() - start, 3),
        "summary": result.summary(),
        "stage1_metrics": result.stage1_metrics.to_dict(),
        "stage2_metrics": result.stage2_metrics.to_dict(),
        "history": result.history.to_dict(),
        "datasets": {name: ds.report.to_dict() for name, ds in result.datasets.items()},
    }
    atomic_write_text(out / "report.json", json.dumps(report, indent=2, default=str) + "\n")
    _emit({"report": str(out / "report.json"), **result.summary()})


def cmd_schema(args, cfg: RunConfig):
    print(json.dumps(run_config_schema(), indent=2))
