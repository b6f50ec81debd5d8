"""
Raw measurement files: CSV (one decimal sample per line) and raw-f32-le
(little-endian 4-byte floats, no header).
"""

import math
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from errors import DataFormatError
from store import atomic_write_bytes
from .profiles import Health
from .timeseries import TimeSeries

logger = logging.getLogger(__name__)

FORMATS = ("csv", "raw-f32-le")
F32_LE = np.dtype("<f4")


def _check_format(fmt: str):
    if fmt not in FORMATS:
        raise ValueError(f"Invalid format '{fmt}'. Must be one of: {list(FORMATS)}")


def load_timeseries(
    path: Union[str, Path],
    fmt: str,
    sample_rate_hz: float,
    channel: str = "unknown",
    health: Health = Health.HEALTHY,
    seed: Optional[int] = None,
) -> TimeSeries:
    """Read a signal file.

    Raises:
        ValueError: Unknown format or non-positive sample rate
        DataFormatError: Missing, empty, malformed or truncated file
    """
    _check_format(fmt)
    if not sample_rate_hz > 0:
        raise ValueError(f"sample_rate_hz must be positive, got {sample_rate_hz}")
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise DataFormatError(f"Signal file not found: {path}", path=str(path))

    if fmt == "csv":
        samples = _parse_csv(data, path)
    else:
        samples = _parse_raw(data, path)

    logger.debug(f"Loaded {samples.size} samples from {path}")
    return TimeSeries(samples=samples, sample_rate_hz=sample_rate_hz, channel=channel,
                      health=Health(health), seed=seed, source=str(path))


def _parse_csv(data: bytes, path: Path) -> np.ndarray:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise DataFormatError(f"{path}: not UTF-8 text at byte {e.start}", path=str(path), offset=e.start)

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataFormatError(f"{path}: empty signal file", path=str(path), offset=0)

    values = np.empty(len(lines), dtype=np.float64)
    for number, line in enumerate(lines, start=1):
        try:
            value = float(line.strip())
        except ValueError:
            raise DataFormatError(f"{path}: line {number}: cannot parse sample {line[:40]!r}",
                                  path=str(path), offset=number)
        if not math.isfinite(value):
            raise DataFormatError(f"{path}: line {number}: non-finite sample {line.strip()!r}",
                                  path=str(path), offset=number)
        values[number - 1] = value
    return values


def _parse_raw(data: bytes, path: Path) -> np.ndarray:
    if len(data) == 0:
        raise DataFormatError(f"{path}: empty signal file", path=str(path), offset=0)
    remainder = len(data) % F32_LE.itemsize
    if remainder:
        offset = len(data) - remainder
        raise DataFormatError(
            f"{path}: truncated raw-f32-le file, {remainder} stray byte(s) at byte offset {offset}",
            path=str(path), offset=offset,
        )
    values = np.frombuffer(data, dtype=F32_LE).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        offset = int(bad[0]) * F32_LE.itemsize
        raise DataFormatError(f"{path}: non-finite sample at byte offset {offset}",
                              path=str(path), offset=offset)
    return values


def save_timeseries(ts: TimeSeries, path: Union[str, Path], fmt: str) -> Path:
    """Write a signal file atomically.

    raw-f32-le stores each sample as a little-endian float32; CSV writes the
    shortest decimal text that parses back to the same float64.

    Raises:
        ValueError: Unknown format
        OSError: Destination not writable (message names the path)
    """
    _check_format(fmt)
    if fmt == "csv":
        payload = "".join(f"{float(v)!r}\n" for v in ts.samples).encode("utf-8")
    else:
        payload = ts.samples.astype(F32_LE).tobytes()
    return atomic_write_bytes(path, payload)
