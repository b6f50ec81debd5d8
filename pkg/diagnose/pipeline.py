"""
Pipeline bundles: a directory holding a manifest, the stage-1 extractor(s)
and forest(s), and the stage-2 classifier, all tied to one preprocessing
fingerprint.

    <bundle>/manifest.json
    <bundle>/stage1/extractor_<i>.json + .f32
    <bundle>/stage1/forest_<i>.json
    <bundle>/stage2/model.json + .f32

Either stage may be absent. The bundle is written into a staging
directory and swapped into place, so a reader never sees half a bundle.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

from errors import DataFormatError, FingerprintMismatchError, VersionMismatchError
from iforest import load_forest, save_forest
from logging_config import storage_logger
from nnet import CnnModel, load_model, save_model
from siggen import COMPONENT_ORDER
from store import atomic_directory
from .stage1 import Stage1Model

PIPELINE_FORMAT = "geardiag-pipeline"
PIPELINE_VERSION = 1
MANIFEST_NAME = "manifest.json"

PathLike = Union[str, Path]


@dataclass
class PipelineBundle:
    fingerprint: str
    stage1: Optional[Stage1Model] = None
    stage2: Optional[CnnModel] = None
    preprocessing: Dict[str, Any] = field(default_factory=dict)
    run: Dict[str, Any] = field(default_factory=dict)

    def require(self, stage: str):
        if getattr(self, stage) is None:
            raise DataFormatError(f"Pipeline bundle has no {stage} model")
        return getattr(self, stage)


def _stage_fingerprints(bundle: PipelineBundle):
    prints = []
    if bundle.stage1 is not None:
        prints.append(("stage1", bundle.stage1.fingerprint))
    if bundle.stage2 is not None and bundle.stage2.fingerprint:
        prints.append(("stage2", bundle.stage2.fingerprint))
    return prints


def save_pipeline(bundle: PipelineBundle, path: PathLike) -> Path:
    """Write the bundle directory atomically.

    Raises:
        FingerprintMismatchError: A stage was trained on other preprocessing
    """
    for stage, fingerprint in _stage_fingerprints(bundle):
        if fingerprint != bundle.fingerprint:
            raise FingerprintMismatchError(
                f"{stage} model fingerprint {fingerprint} != bundle fingerprint {bundle.fingerprint}")

    path = Path(path)
    manifest: Dict[str, Any] = {
        "format": PIPELINE_FORMAT,
        "version": PIPELINE_VERSION,
        "fingerprint": bundle.fingerprint,
        "components": list(COMPONENT_ORDER),
        "preprocessing": bundle.preprocessing,
        "run": bundle.run,
        "stage1": None,
        "stage2": None,
    }
    with atomic_directory(path) as staging:
        if bundle.stage1 is not None:
            stage_dir = staging / "stage1"
            stage_dir.mkdir()
            extractors, forests = [], []
            for i, (extractor, forest) in enumerate(zip(bundle.stage1.extractors, bundle.stage1.forests)):
                save_model(extractor, stage_dir / f"extractor_{i}.json")
                save_forest(forest, stage_dir / f"forest_{i}.json")
                extractors.append(f"stage1/extractor_{i}.json")
                forests.append(f"stage1/forest_{i}.json")
            manifest["stage1"] = {
                "extractor_mode": bundle.stage1.extractor_mode,
                "per_channel": bundle.stage1.per_channel,
                "extractors": extractors,
                "forests": forests,
            }
        if bundle.stage2 is not None:
            stage_dir = staging / "stage2"
            stage_dir.mkdir()
            save_model(bundle.stage2, stage_dir / "model.json")
            manifest["stage2"] = {"model": "stage2/model.json", "model_id": bundle.stage2.model_id}
        (staging / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    storage_logger.finished(
        "save_pipeline", path=str(path), stage1=bundle.stage1 is not None, stage2=bundle.stage2 is not None,
    )
    return path


def read_pipeline_manifest(path: PathLike) -> Dict[str, Any]:
    manifest_path = Path(path) / MANIFEST_NAME
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataFormatError(f"No pipeline manifest at {manifest_path}", path=str(manifest_path))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataFormatError(f"Pipeline manifest {manifest_path} is not valid JSON: {e}", path=str(manifest_path))
    if manifest.get("format") != PIPELINE_FORMAT or manifest.get("version") != PIPELINE_VERSION:
        raise VersionMismatchError(
            f"{manifest_path}: expected {PIPELINE_FORMAT} v{PIPELINE_VERSION}, "
            f"found {manifest.get('format')!r} v{manifest.get('version')!r}",
            path=str(manifest_path),
        )
    return manifest


def load_pipeline(path: PathLike) -> PipelineBundle:
    """Load a bundle written by save_pipeline; every payload is checksum-verified.

    Raises:
        VersionMismatchError / ChecksumError / DataFormatError: Bad bundle contents
        FingerprintMismatchError: Stages disagree on preprocessing
    """
    root = Path(path)
    manifest = read_pipeline_manifest(root)
    fingerprint = manifest["fingerprint"]

    stage1 = None
    section = manifest.get("stage1")
    if section:
        extractors = [load_model(root / name) for name in section["extractors"]]
        forests = [load_forest(root / name) for name in section["forests"]]
        if len(extractors) != len(forests) or not extractors:
            raise DataFormatError(f"{root}: stage-1 extractor/forest lists do not pair up", path=str(root))
        stage1 = Stage1Model(
            extractor_mode=section["extractor_mode"],
            extractors=extractors,
            forests=forests,
            fingerprint=fingerprint,
            per_channel=bool(section["per_channel"]),
        )
        for extractor in extractors:
            if extractor.fingerprint and extractor.fingerprint != fingerprint:
                raise FingerprintMismatchError(
                    f"{root}: stage-1 extractor fingerprint {extractor.fingerprint} != bundle {fingerprint}")

    stage2 = None
    section = manifest.get("stage2")
    if section:
        stage2 = load_model(root / section["model"])
        if stage2.fingerprint and stage2.fingerprint != fingerprint:
            raise FingerprintMismatchError(
                f"{root}: stage-2 model fingerprint {stage2.fingerprint} != bundle {fingerprint}")

    return PipelineBundle(
        fingerprint=fingerprint,
        stage1=stage1,
        stage2=stage2,
        preprocessing=manifest.get("preprocessing", {}),
        run=manifest.get("run", {}),
    )
