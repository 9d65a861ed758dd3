"""Python bindings for the sap library."""

from ._sap import (
    ConfigError,
    ContractError,
    DimensionError,
    Environment,
    UnsupportedEnvError,
    aggregate,
    config_hash,
    config_names,
    compute_ci,
    default_config,
    exploration_bank,
    extract_window,
    load_config,
    parse_config,
    replay_check,
    run,
    window_width,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "DimensionError",
    "Environment",
    "UnsupportedEnvError",
    "aggregate",
    "config_hash",
    "config_names",
    "compute_ci",
    "default_config",
    "exploration_bank",
    "extract_window",
    "load_config",
    "parse_config",
    "replay_check",
    "run",
    "window_width",
]
