from .seeds import derive_seed
from .settings import (
    CONFIG_ENV_VAR,
    EXTRACTOR_MODES,
    DatasetParams,
    ForestParams,
    PathsConfig,
    RunConfig,
    Stage1Params,
    default_config_path,
    load_run_config,
    parse_run_config,
    run_config_schema,
)

__all__ = [
    "CONFIG_ENV_VAR",
    "EXTRACTOR_MODES",
    "DatasetParams",
    "ForestParams",
    "PathsConfig",
    "RunConfig",
    "Stage1Params",
    "default_config_path",
    "derive_seed",
    "load_run_config",
    "parse_run_config",
    "run_config_schema",
]
