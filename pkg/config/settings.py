"""
Run configuration.

A run is described by one JSON document validated against RunConfig. The
default document path comes from the GEARDIAG_CONFIG environment variable
(a `.env` file is honored); the CLI's --config flag overrides it.
"""

import json
import os
from pathlib import Path
from typing import Literal, Optional, Tuple, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from errors import ConfigError
from nnet import TrainConfig
from spectro import StftConfig

CONFIG_ENV_VAR = "GEARDIAG_CONFIG"
EXTRACTOR_MODES = ("random", "stage2")


class PathsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    data_dir: str = "data"
    model_dir: str = "models"
    report_dir: str = "reports"


class ForestParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_trees: int = Field(100, ge=1)
    subsample_size: int = Field(256, ge=2)
    contamination: float = Field(0.0001, gt=0, lt=0.5)
    height_limit: Optional[int] = Field(None, ge=1)
    n_jobs: int = Field(1, ge=1)


class DatasetParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    signal_duration_s: float = Field(60.0, gt=0)
    segment_duration_s: float = Field(1.0, gt=0)
    segments_per_source: int = Field(500, ge=1)
    stage2_total: int = Field(10000, ge=3)
    stage1_total: int = Field(5000, ge=3)
    ratios: Tuple[float, float, float] = (8.0, 1.0, 1.0)
    mixing: bool = True
    damaged_fraction: float = Field(0.5, gt=0, lt=1)

    @field_validator("ratios")
    @classmethod
    def _positive_ratios(cls, value):
        if any(r <= 0 for r in value):
            raise ValueError(f"ratios must be positive, got {list(value)}")
        return value


class Stage1Params(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    extractor: Literal["random", "stage2"] = "random"
    n_filters: int = Field(16, ge=1)
    per_channel: bool = False


class RunConfig(BaseModel):
    """Everything a CLI run needs besides its command-line arguments."""
    model_config = ConfigDict(extra="forbid")

    master_seed: int = Field(0, ge=0)
    paths: PathsConfig = PathsConfig()
    rig: Optional[str] = None
    stft: StftConfig = StftConfig()
    train: TrainConfig = TrainConfig()
    forest: ForestParams = ForestParams()
    dataset: DatasetParams = DatasetParams()
    stage1: Stage1Params = Stage1Params()
    stage2_filters: int = Field(4, ge=1)
    dropout_rate: float = Field(0.10, ge=0, lt=1)


def _field_errors(error: ValidationError) -> list[str]:
    return [
        f"{'.'.join(str(part) for part in item['loc']) or '<root>'}: {item['msg']}"
        for item in error.errors()
    ]


def parse_run_config(raw: dict, source: str = "<config>") -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        fields = _field_errors(e)
        raise ConfigError(f"{source}: invalid run configuration: {'; '.join(fields)}", fields=fields)


def default_config_path() -> Optional[str]:
    load_dotenv()
    return os.getenv(CONFIG_ENV_VAR) or None


def load_run_config(path: Union[str, Path, None] = None) -> RunConfig:
    """Load and validate a run configuration.

    Without a path, GEARDIAG_CONFIG is consulted; without either, defaults apply.

    Raises:
        ConfigError: Unreadable file, invalid JSON or schema violation
    """
    if path is None:
        path = default_config_path()
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_run_config(raw, source=str(path))


def run_config_schema() -> dict:
    return RunConfig.model_json_schema()
