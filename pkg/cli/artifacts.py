"""
CSV and JSON artifacts exchanged between CLI commands: the signal index
written by `generate`, stage-1 score listings, stage-2 predictions and
ground-truth label files.
"""

import csv
import io
import json
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from diagnose import Diagnosis, ScoreRow
from errors import DataFormatError
from siggen import COMPONENT_ORDER, Health, TimeSeries, load_timeseries, save_timeseries
from store import atomic_write_text

PathLike = Union[str, Path]

SIGNAL_INDEX = "signals.json"
SCORE_COLUMNS = ["split", "index", "truth", "s", "signed", "mean_path_length", "anomalous"]


def component_slug(name: str) -> str:
    return name.replace(" ", "_").replace("-", "_")


LABEL_COLUMNS = [component_slug(name) for name in COMPONENT_ORDER]


def write_signal_set(signals: Dict[Tuple[str, Health], TimeSeries], out_dir: PathLike, fmt: str) -> Path:
    """One file per (component, health) plus an index describing them."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    extension = "csv" if fmt == "csv" else "f32"
    entries = []
    for (name, health), ts in signals.items():
        filename = f"{component_slug(name)}_{health}.{extension}"
        save_timeseries(ts, out_dir / filename, fmt)
        entries.append({"channel": name, "health": str(health), "file": filename, "seed": ts.seed})
    sample_rate = next(iter(signals.values())).sample_rate_hz
    index = {"format": fmt, "sample_rate_hz": sample_rate, "files": entries}
    return atomic_write_text(out_dir / SIGNAL_INDEX, json.dumps(index, indent=2) + "\n")


def read_signal_set(path: PathLike) -> List[TimeSeries]:
    """Load every series named by a signal index (file or its directory)."""
    path = Path(path)
    index_path = path / SIGNAL_INDEX if path.is_dir() else path
    try:
        index = json.loads(index_path.read_text(encoding="utf-8"))
        fmt = index["format"]
        rate = float(index["sample_rate_hz"])
        entries = index["files"]
    except FileNotFoundError:
        raise DataFormatError(f"Signal index not found: {index_path}", path=str(index_path))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f"Malformed signal index {index_path}: {e}", path=str(index_path))
    return [
        load_timeseries(index_path.parent / entry["file"], fmt, rate,
                        channel=entry["channel"], health=Health(entry["health"]), seed=entry.get("seed"))
        for entry in entries
    ]


def csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _read_csv(path: PathLike, required: Sequence[str]) -> List[dict]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataFormatError(f"File not found: {path}", path=str(path))
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in required if c not in (reader.fieldnames or [])]
    if missing:
        raise DataFormatError(f"{path}: missing columns {missing}", path=str(path))
    return list(reader)


def write_scores(rows: Sequence[ScoreRow], path: PathLike) -> Path:
    body = [
        [r.split, r.index, r.truth, repr(r.s), repr(r.signed), repr(r.mean_path_length), int(r.anomalous)]
        for r in rows
    ]
    return atomic_write_text(Path(path), csv_text(SCORE_COLUMNS, body))


def read_scores(path: PathLike) -> List[ScoreRow]:
    """Parse a score listing; an empty listing is an error.

    Raises:
        DataFormatError: Missing columns, bad numbers or no rows
    """
    records = _read_csv(path, SCORE_COLUMNS)
    if not records:
        raise DataFormatError(f"{path}: score file holds no rows", path=str(path))
    rows = []
    for line, record in enumerate(records, start=2):
        try:
            rows.append(ScoreRow(
                split=record["split"],
                index=record["index"],
                truth=record["truth"],
                s=float(record["s"]),
                signed=float(record["signed"]),
                mean_path_length=float(record["mean_path_length"]),
            ))
        except ValueError as e:
            raise DataFormatError(f"{path}: line {line}: {e}", path=str(path), offset=line)
        if rows[-1].truth not in ("healthy", "damaged"):
            raise DataFormatError(f"{path}: line {line}: truth must be healthy or damaged", path=str(path), offset=line)
    return rows


def write_predictions(diagnoses: Sequence[Diagnosis], path: PathLike) -> Path:
    header = ["index"] + [f"p_{c}" for c in LABEL_COLUMNS] + LABEL_COLUMNS + ["signed"]
    body = []
    for d in diagnoses:
        body.append(
            [d.segment_id]
            + [repr(float(p)) for p in d.probabilities]
            + [int(v) for v in d.verdicts]
            + ["" if d.signed_score is None else repr(d.signed_score)]
        )
    return atomic_write_text(Path(path), csv_text(header, body))


def write_truth(ids: Sequence[str], labels: np.ndarray, path: PathLike) -> Path:
    body = [[i] + [int(v) for v in row] for i, row in zip(ids, labels)]
    return atomic_write_text(Path(path), csv_text(["index"] + LABEL_COLUMNS, body))


def read_label_file(path: PathLike) -> Tuple[List[str], np.ndarray]:
    """(ids, 0/1 matrix) from a predictions or truth file."""
    records = _read_csv(path, ["index"] + LABEL_COLUMNS)
    ids, labels = [], []
    for line, record in enumerate(records, start=2):
        try:
            row = [int(record[c]) for c in LABEL_COLUMNS]
        except ValueError as e:
            raise DataFormatError(f"{path}: line {line}: {e}", path=str(path), offset=line)
        if any(v not in (0, 1) for v in row):
            raise DataFormatError(f"{path}: line {line}: labels must be 0 or 1", path=str(path), offset=line)
        ids.append(record["index"])
        labels.append(row)
    return ids, np.asarray(labels, dtype=np.int8).reshape(-1, len(LABEL_COLUMNS))
