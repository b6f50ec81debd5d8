"""
geardiag command line.

    geardiag [--config FILE] [--seed N] [--deterministic] [--log-level LEVEL] <command> ...

Exit codes: 0 success, 1 usage, 2 configuration, 3 data/format, 4 numeric.
Failures print one line to stderr:

    geardiag-error code=<n> kind=<kind> message=<text>
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

from config import load_run_config
from errors import GearDiagError, UsageError
from logging_config import clear_run_context, configure_logging, set_run_id
from siggen.timeseries_io import FORMATS
from . import commands
from .sweep import SWEEP_DIMENSIONS

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class GearDiagParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_rig(parser):
    parser.add_argument("--rig", help="Rig profile JSON (default: built-in rig or config 'rig')")


def _add_instances(parser, default_splits: str):
    parser.add_argument("--dataset", help="Dataset archive manifest")
    parser.add_argument("--splits", default=default_splits, help=f"Comma-separated splits (default: {default_splits})")
    parser.add_argument("--segments", help="Segments archive manifest instead of a dataset")


def build_parser() -> argparse.ArgumentParser:
    parser = GearDiagParser(prog="geardiag", description="Two-stage gearbox vibration fault diagnosis")
    parser.add_argument("--config", help="Run configuration JSON (default: $GEARDIAG_CONFIG)")
    parser.add_argument("--seed", type=int, help="Override the configured master seed")
    parser.add_argument("--deterministic", action="store_true",
                        help="Single-threaded forest fitting for bit-identical reruns")
    parser.add_argument("--log-level", choices=LOG_LEVELS, help="Log level for stderr (default: WARNING)")
    sub = parser.add_subparsers(dest="command", parser_class=GearDiagParser)

    p = sub.add_parser("generate", help="Synthesize one signal per component and health state")
    _add_rig(p)
    p.add_argument("--duration", type=float, help="Signal length in seconds")
    p.add_argument("--format", choices=FORMATS, default="raw-f32-le")
    p.add_argument("--out", help="Output directory")
    p.set_defaults(handler=commands.cmd_generate)

    p = sub.add_parser("spectrogram", help="STFT magnitude spectrograms of signal files")
    p.add_argument("--signals", help="Signal index (or its directory) written by generate")
    p.add_argument("--input", help="Single signal file")
    p.add_argument("--format", choices=FORMATS, default="raw-f32-le")
    p.add_argument("--sample-rate", type=float, help="Sample rate of --input in Hz")
    p.add_argument("--channel", default="unknown")
    p.add_argument("--health", choices=("healthy", "damaged"), default="healthy")
    p.add_argument("--out", help="Output manifest (single file) or directory (--signals)")
    p.set_defaults(handler=commands.cmd_spectrogram)

    p = sub.add_parser("build-dataset", help="Sample segments and assemble a labeled dataset")
    _add_rig(p)
    p.add_argument("--stage", type=int, choices=(1, 2), default=2)
    p.add_argument("--signals", help="Use measured signals from this index instead of synthesizing")
    p.add_argument("--out", help="Dataset manifest path")
    p.set_defaults(handler=commands.cmd_build_dataset)

    p = sub.add_parser("train-stage1", help="Fit the healthy-only anomaly detector")
    p.add_argument("--dataset", required=True)
    p.add_argument("--extractor", choices=("random", "stage2"))
    p.add_argument("--stage2-model", help="Bundle holding the stage-2 model (extractor 'stage2')")
    p.add_argument("--filters", type=int)
    p.add_argument("--per-channel", action="store_true")
    p.add_argument("--out", help="Bundle directory")
    p.set_defaults(handler=commands.cmd_train_stage1)

    p = sub.add_parser("detect", help="Score instances with a stage-1 bundle")
    p.add_argument("--model", required=True, help="Bundle directory")
    _add_instances(p, "train,test")
    p.add_argument("--out", help="Scores CSV")
    p.set_defaults(handler=commands.cmd_detect)

    p = sub.add_parser("train-stage2", help="Train the multi-label fault-type classifier")
    p.add_argument("--dataset", required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--filters", type=int)
    p.add_argument("--out", help="Bundle directory")
    p.add_argument("--history", help="Training history JSON")
    p.set_defaults(handler=commands.cmd_train_stage2)

    p = sub.add_parser("classify", help="Fault-type probabilities and verdicts")
    p.add_argument("--model", required=True, help="Bundle directory holding stage 2")
    p.add_argument("--stage1-model", help="Bundle whose stage-1 scores are attached")
    _add_instances(p, "test")
    p.add_argument("--out", help="Predictions CSV")
    p.add_argument("--truth-out", help="Also write the ground-truth labels here")
    p.set_defaults(handler=commands.cmd_classify)

    p = sub.add_parser("evaluate", help="Precision, recall and accuracy tables")
    p.add_argument("--predictions")
    p.add_argument("--truth")
    p.add_argument("--scores", help="Stage-1 scores CSV")
    p.add_argument("--split", help="Restrict --scores to one split")
    p.add_argument("--out", help="Metrics CSV")
    p.add_argument("--json", help="Also write metrics JSON")
    p.set_defaults(handler=commands.cmd_evaluate)

    p = sub.add_parser("sweep", help="Rerun the pipeline over values of one setting")
    _add_rig(p)
    p.add_argument("--dimension", required=True, choices=SWEEP_DIMENSIONS)
    p.add_argument("--values", required=True, help="Comma-separated values, e.g. 1/60,0.125,0.25")
    p.add_argument("--resolution-only", action="store_true", help="window_s: only the resolution table")
    p.add_argument("--out", help="Output directory")
    p.set_defaults(handler=commands.cmd_sweep)

    p = sub.add_parser("render", help="SVG figure plus CSV of the plotted values")
    p.add_argument("--input", required=True, help="Scores CSV or spectrogram/segments/dataset manifest")
    p.add_argument("--index", type=int, default=0, help="Segment or instance to draw")
    p.add_argument("--split", default="test", help="Dataset split for --index")
    p.add_argument("--interval-s", type=float, default=1.0, help="Variability interval for spectrograms")
    p.add_argument("--out", help="SVG path")
    p.set_defaults(handler=commands.cmd_render)

    p = sub.add_parser("demo", help="End-to-end run on synthetic data")
    _add_rig(p)
    p.add_argument("--out", help="Output directory")
    p.set_defaults(handler=commands.cmd_demo)

    p = sub.add_parser("schema", help="Print the run configuration JSON schema")
    p.set_defaults(handler=commands.cmd_schema)
    return parser


def _report(code: int, kind: str, message: str) -> int:
    text = " ".join(str(message).split())
    print(f"geardiag-error code={code} kind={kind} message={text}", file=sys.stderr)
    return code


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, dispatch and map failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        configure_logging(default_level="WARNING", level=args.log_level)
        if not getattr(args, "handler", None):
            raise UsageError("No command given. Run 'geardiag --help' for the command list")
        cfg = load_run_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise UsageError(f"--seed must be >= 0, got {args.seed}")
            cfg = cfg.model_copy(update={"master_seed": args.seed})
        if args.deterministic:
            cfg = cfg.model_copy(update={"forest": cfg.forest.model_copy(update={"n_jobs": 1})})
        logger.info(f"{args.command} master_seed={cfg.master_seed}")
        args.handler(args, cfg)
        return 0
    except GearDiagError as e:
        return _report(e.exit_code, e.kind, e)
    except ValidationError as e:
        return _report(2, "config", e)
    except ArithmeticError as e:
        return _report(4, "numeric", e)
    except (ValueError, OSError) as e:
        return _report(3, "data", e)


def main(argv: Optional[Sequence[str]] = None) -> int:
    run_id = set_run_id()
    try:
        return run(argv)
    finally:
        logger.debug(f"run {run_id} finished")
        clear_run_context()


if __name__ == "__main__":
    sys.exit(main())
