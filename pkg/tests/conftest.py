"""
Shared fixtures: a reduced-rate rig, a desk-scale run configuration and
small synthetic segment pools that need no STFT.
"""

import json

import numpy as np
import pytest

from config import parse_run_config
from siggen import COMPONENT_ORDER, Health, RigProfile, default_rig
from spectro import SpectrogramSegment, assemble_dataset

TINY_SHAPE = (8, 12)
TINY_FINGERPRINT = "tiny0000fingerprint"


def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers",
        "slow: end-to-end runs of the whole pipeline (deselect with '-m \"not slow\"')"
    )


@pytest.fixture(autouse=True)
def isolated_environment(monkeypatch):
    """Keep a developer's GEARDIAG_CONFIG or log settings out of the tests."""
    monkeypatch.delenv("GEARDIAG_CONFIG", raising=False)
    monkeypatch.delenv("ENVIRONMENT", raising=False)
    monkeypatch.delenv("LOG_LEVEL", raising=False)


@pytest.fixture(scope="session")
def small_rig() -> RigProfile:
    """Default components sampled at 4 kHz; the 1 kHz band limit stays below Nyquist."""
    return RigProfile(sample_rate_hz=4000.0, components=default_rig().components)


DESK_CONFIG = {
    "master_seed": 7,
    "dataset": {
        "signal_duration_s": 4.0,
        "segment_duration_s": 1.0,
        "segments_per_source": 20,
        "stage2_total": 80,
        "stage1_total": 60,
    },
    "train": {"epochs": 2, "batch_size": 16},
    "forest": {"n_trees": 20, "subsample_size": 32, "contamination": 0.05},
    "stage1": {"n_filters": 2},
}


@pytest.fixture
def desk_config():
    return parse_run_config(json.loads(json.dumps(DESK_CONFIG)))


@pytest.fixture
def desk_config_file(tmp_path, small_rig):
    """Config + rig profile on disk, as the CLI reads them."""
    rig_path = tmp_path / "rig.json"
    rig_path.write_text(small_rig.model_dump_json(), encoding="utf-8")
    document = json.loads(json.dumps(DESK_CONFIG))
    document["rig"] = str(rig_path)
    document["paths"] = {
        "data_dir": str(tmp_path / "data"),
        "model_dir": str(tmp_path / "models"),
        "report_dir": str(tmp_path / "reports"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path


def make_tiny_pools(seed: int = 0, per_source: int = 12, shift: float = 3.0, fingerprint: str = TINY_FINGERPRINT):
    """Single-channel pools keyed by (component, health); damaged grids are shifted up."""
    rng = np.random.default_rng(seed)
    pools = {}
    for name in COMPONENT_ORDER:
        for health in (Health.HEALTHY, Health.DAMAGED):
            offset = shift if health == Health.DAMAGED else 0.0
            pools[(name, health)] = [
                SpectrogramSegment(
                    magnitudes=rng.normal(offset, 1.0, size=TINY_SHAPE + (1,)),
                    duration_s=1.0,
                    fingerprint=fingerprint,
                    channels=(name,),
                    healths=(health,),
                    offsets_s=(0.05 * k,),
                )
                for k in range(per_source)
            ]
    return pools


@pytest.fixture
def tiny_pools():
    return make_tiny_pools()


@pytest.fixture
def tiny_dataset(tiny_pools):
    """Channel-mixed dataset over the tiny pools, 60/10/10."""
    return assemble_dataset(tiny_pools, ratios=(6, 1, 1), total=80, seed=3)


@pytest.fixture
def tiny_whole_gearbox_dataset(tiny_pools):
    """Instances entirely healthy or entirely damaged."""
    return assemble_dataset(tiny_pools, ratios=(6, 1, 1), total=80, seed=4, mixing=False)
