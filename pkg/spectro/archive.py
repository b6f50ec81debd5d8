"""
Persisted spectrograms, segment lists and datasets.

Each is a store container: JSON manifest (shape, config, labels, seed) plus
a raw-f32-le payload laid out frame-major, then bin, then channel.
"""

import json
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Sequence, Union

import numpy as np

from errors import DataFormatError, GearDiagError, ShapeError
from siggen import Health
from store import read_container, write_container
from .dataset import SPLIT_NAMES, BuildReport, DatasetPartition, LabeledDataset
from .segments import SpectrogramSegment
from .stft import Spectrogram, StftConfig

SPECTROGRAM_FORMAT = "geardiag-spectrogram"
SEGMENTS_FORMAT = "geardiag-segments"
DATASET_FORMAT = "geardiag-dataset"
ARCHIVE_VERSION = 1

PathLike = Union[str, Path]


def archive_kind(manifest_path: PathLike) -> str:
    """Format tag of a manifest, without validating the payload."""
    try:
        manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as e:
        raise DataFormatError(f"Cannot read manifest {manifest_path}: {e}", path=str(manifest_path))
    if not isinstance(manifest, dict):
        raise DataFormatError(f"{manifest_path} is not a manifest object", path=str(manifest_path))
    return str(manifest.get("format", ""))


@contextmanager
def _manifest_fields(path: PathLike, kind: str) -> Iterator[None]:
    """Turn a missing or mistyped manifest field into a DataFormatError."""
    try:
        yield
    except GearDiagError:
        raise
    except KeyError as e:
        raise DataFormatError(f"{path}: {kind} manifest lacks field {e.args[0]!r}", path=str(path))
    except (TypeError, ValueError) as e:
        raise DataFormatError(f"{path}: malformed {kind} manifest: {e}", path=str(path))


def save_spectrogram(spec: Spectrogram, path: PathLike) -> Path:
    header = {
        "channel": spec.channel,
        "health": str(spec.health),
        "sample_rate_hz": spec.sample_rate_hz,
        "stft": spec.config.model_dump(),
        "n_frames": spec.n_frames,
        "n_bins": spec.n_bins,
    }
    return write_container(path, SPECTROGRAM_FORMAT, ARCHIVE_VERSION, header,
                           {"magnitudes": spec.magnitudes})


def load_spectrogram(path: PathLike) -> Spectrogram:
    manifest, arrays = read_container(path, SPECTROGRAM_FORMAT, ARCHIVE_VERSION)
    with _manifest_fields(path, "spectrogram"):
        cfg = StftConfig.model_validate(manifest["stft"])
        fs = float(manifest["sample_rate_hz"])
        window = round(cfg.window_s * fs)
        hop = round(cfg.hop_s * fs)
        n_frames, n_bins = manifest["n_frames"], manifest["n_bins"]
        return Spectrogram(
            magnitudes=arrays["magnitudes"],
            frame_times_s=np.arange(n_frames, dtype=np.float64) * hop / fs,
            bin_freqs_hz=np.fft.rfftfreq(window, d=1.0 / fs)[:n_bins],
            config=cfg,
            sample_rate_hz=fs,
            channel=manifest["channel"],
            health=Health(manifest["health"]),
        )


def save_segments(segments: Sequence[SpectrogramSegment], path: PathLike, seed: int = 0) -> Path:
    if not segments:
        raise ValueError("No segments to save")
    shapes = {s.shape for s in segments}
    if len(shapes) != 1:
        raise ShapeError(f"Segments in one archive must share a shape, got {sorted(shapes)}")
    first = segments[0]
    header = {
        "shape": list(first.shape),
        "count": len(segments),
        "seed": seed,
        "duration_s": first.duration_s,
        "fingerprint": first.fingerprint,
        "sample_rate_hz": first.sample_rate_hz,
        "bin_spacing_hz": first.bin_spacing_hz,
        "hop_s": first.hop_s,
        "segments": [
            {
                "channels": list(s.channels),
                "healths": [str(h) for h in s.healths],
                "offsets_s": list(s.offsets_s),
                "labels": None if s.labels is None else [int(v) for v in s.labels],
            }
            for s in segments
        ],
    }
    grids = np.stack([s.magnitudes for s in segments])
    return write_container(path, SEGMENTS_FORMAT, ARCHIVE_VERSION, header, {"magnitudes": grids})


def load_segments(path: PathLike) -> List[SpectrogramSegment]:
    manifest, arrays = read_container(path, SEGMENTS_FORMAT, ARCHIVE_VERSION)
    with _manifest_fields(path, "segments"):
        grids = arrays["magnitudes"]
        segments = []
        for grid, meta in zip(grids, manifest["segments"]):
            segments.append(SpectrogramSegment(
                magnitudes=grid,
                duration_s=manifest["duration_s"],
                fingerprint=manifest["fingerprint"],
                channels=tuple(meta["channels"]),
                healths=tuple(Health(h) for h in meta["healths"]),
                offsets_s=tuple(meta["offsets_s"]),
                labels=None if meta["labels"] is None else np.asarray(meta["labels"]),
                sample_rate_hz=manifest["sample_rate_hz"],
                bin_spacing_hz=manifest["bin_spacing_hz"],
                hop_s=manifest["hop_s"],
            ))
    return segments


def save_dataset(dataset: LabeledDataset, path: PathLike) -> Path:
    header = {
        "seed": dataset.seed,
        "ratios": list(dataset.ratios),
        "duration_s": dataset.duration_s,
        "fingerprint": dataset.fingerprint,
        "sample_rate_hz": dataset.sample_rate_hz,
        "bin_spacing_hz": dataset.bin_spacing_hz,
        "hop_s": dataset.hop_s,
        "mixing": dataset.mixing,
        "stft": None if dataset.stft_config is None else dataset.stft_config.model_dump(),
        "bank_channel": dataset.bank_channel.tolist(),
        "bank_health": dataset.bank_health.tolist(),
        "bank_offset_s": dataset.bank_offset_s.tolist(),
        "partitions": {
            name: {
                "instance_ids": part.instance_ids.tolist(),
                "sources": part.sources.tolist(),
                "labels": part.labels.tolist(),
            }
            for name, part in ((n, dataset.partition(n)) for n in SPLIT_NAMES)
        },
        "report": None if dataset.report is None else dataset.report.to_dict(),
    }
    return write_container(path, DATASET_FORMAT, ARCHIVE_VERSION, header, {"bank": dataset.bank})


def _partition(name: str, raw: dict, n_channels: int) -> DatasetPartition:
    return DatasetPartition(
        name=name,
        instance_ids=np.asarray(raw["instance_ids"], dtype=np.int64),
        sources=np.asarray(raw["sources"], dtype=np.int64).reshape(-1, n_channels),
        labels=np.asarray(raw["labels"], dtype=np.int8).reshape(-1, n_channels),
    )


def load_dataset(path: PathLike) -> LabeledDataset:
    manifest, arrays = read_container(path, DATASET_FORMAT, ARCHIVE_VERSION)
    with _manifest_fields(path, "dataset"):
        parts = {name: _partition(name, manifest["partitions"][name], 3) for name in SPLIT_NAMES}
        report = manifest.get("report")
        return LabeledDataset(
            bank=arrays["bank"].astype(np.float32),
            bank_channel=np.asarray(manifest["bank_channel"], dtype=np.int8),
            bank_health=np.asarray(manifest["bank_health"], dtype=np.int8),
            bank_offset_s=np.asarray(manifest["bank_offset_s"], dtype=np.float64),
            train=parts["train"],
            validation=parts["validation"],
            test=parts["test"],
            ratios=tuple(manifest["ratios"]),
            seed=manifest["seed"],
            duration_s=manifest["duration_s"],
            fingerprint=manifest["fingerprint"],
            sample_rate_hz=manifest["sample_rate_hz"],
            bin_spacing_hz=manifest["bin_spacing_hz"],
            hop_s=manifest["hop_s"],
            mixing=manifest["mixing"],
            stft_config=None if manifest["stft"] is None else StftConfig.model_validate(manifest["stft"]),
            report=None if report is None else BuildReport(**report),
        )

