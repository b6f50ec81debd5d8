"""
Manifest + payload container.

A container is two files: `<name>.json` holding a structured manifest and
`<name>.f32` holding every array as little-endian float32, concatenated in
manifest order. The manifest records the payload length and SHA-256 so a
truncated or modified payload is refused instead of half-loaded.
"""

import json
import hashlib
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np

from errors import ChecksumError, DataFormatError, VersionMismatchError
from .atomic import PathLike, atomic_write_bytes, atomic_write_text

F32_LE = np.dtype("<f4")


def _payload_path(manifest_path: Path) -> Path:
    return manifest_path.with_suffix(".f32")


def write_container(
    manifest_path: PathLike,
    fmt: str,
    version: int,
    header: Dict[str, Any],
    arrays: Dict[str, np.ndarray],
) -> Path:
    """Persist arrays as raw f32 plus a JSON manifest describing them.

    Args:
        manifest_path: Destination of the JSON manifest; the payload goes
            next to it with a `.f32` suffix
        fmt: Format tag checked on load
        version: Format version checked on load
        header: Extra JSON-serializable fields stored in the manifest
        arrays: Named arrays, written in insertion order

    Returns:
        Path of the manifest
    """
    manifest_path = Path(manifest_path)
    entries = []
    chunks = []
    offset = 0
    for name, array in arrays.items():
        data = np.ascontiguousarray(array, dtype=F32_LE)
        chunks.append(data.tobytes(order="C"))
        entries.append({"name": name, "shape": list(data.shape), "offset": offset})
        offset += data.nbytes
    payload = b"".join(chunks)

    manifest = {
        "format": fmt,
        "version": version,
        **header,
        "arrays": entries,
        "payload_file": _payload_path(manifest_path).name,
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    # payload first: a manifest never points at a payload that is not there
    atomic_write_bytes(_payload_path(manifest_path), payload)
    atomic_write_text(manifest_path, json.dumps(manifest, indent=2, sort_keys=False) + "\n")
    return manifest_path


def read_manifest(manifest_path: PathLike, fmt: str, version: int) -> Dict[str, Any]:
    """Load and check a manifest's format tag and version."""
    manifest_path = Path(manifest_path)
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataFormatError(f"Manifest not found: {manifest_path}", path=str(manifest_path))
    except json.JSONDecodeError as e:
        raise DataFormatError(
            f"Manifest {manifest_path} is not valid JSON at byte {e.pos}: {e.msg}",
            path=str(manifest_path), offset=e.pos,
        )
    if not isinstance(manifest, dict):
        raise DataFormatError(f"{manifest_path} is not a manifest object", path=str(manifest_path))

    if manifest.get("format") != fmt:
        raise VersionMismatchError(
            f"{manifest_path} has format {manifest.get('format')!r}, expected {fmt!r}",
            path=str(manifest_path),
        )
    if manifest.get("version") != version:
        raise VersionMismatchError(
            f"{manifest_path} has {fmt} version {manifest.get('version')!r}, "
            f"this build reads version {version}",
            path=str(manifest_path),
        )
    return manifest


def read_container(manifest_path: PathLike, fmt: str, version: int) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Load a container written by write_container.

    Returns:
        (manifest, arrays) with arrays converted to float64

    Raises:
        VersionMismatchError: Wrong format tag or version
        ChecksumError: Payload length or digest differs from the manifest
    """
    manifest_path = Path(manifest_path)
    manifest = read_manifest(manifest_path, fmt, version)
    missing = [key for key in ("payload_file", "payload_bytes", "payload_sha256", "arrays") if key not in manifest]
    if missing:
        raise DataFormatError(f"{manifest_path}: manifest lacks field(s) {missing}", path=str(manifest_path))
    payload_path = manifest_path.parent / manifest["payload_file"]
    try:
        payload = payload_path.read_bytes()
    except FileNotFoundError:
        raise ChecksumError(f"Payload missing: {payload_path}", path=str(payload_path))

    if len(payload) != manifest["payload_bytes"]:
        raise ChecksumError(
            f"Payload {payload_path} has {len(payload)} bytes, manifest declares "
            f"{manifest['payload_bytes']} ({fmt} v{version})",
            path=str(payload_path), offset=len(payload),
        )
    digest = hashlib.sha256(payload).hexdigest()
    if digest != manifest["payload_sha256"]:
        raise ChecksumError(
            f"Payload {payload_path} checksum {digest[:12]} does not match manifest "
            f"{manifest['payload_sha256'][:12]} ({fmt} v{version})",
            path=str(payload_path),
        )

    arrays = {}
    try:
        for entry in manifest["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape, dtype=np.int64))
            flat = np.frombuffer(payload, dtype=F32_LE, count=count, offset=entry["offset"])
            arrays[entry["name"]] = flat.astype(np.float64).reshape(shape)
    except (KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f"{manifest_path}: malformed array table: {e}", path=str(manifest_path))
    return manifest, arrays
