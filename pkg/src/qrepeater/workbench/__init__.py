"""Configuration, sweeps, validation suites and the command-line front end."""

from .config import ConfigError, RunConfig, build_params, load_config, parse_config
from .suites import SUITES, Check, SuiteResult, run_suite
from .sweeps import (
    Axis,
    EngineOptions,
    SweepSpec,
    evaluate,
    iso_rate_curve,
    iso_rate_point,
    preset_series,
    run_sweep,
    sweep_distance,
    sweep_memory,
)
from .tables import ResultTable, tables_equal

__all__ = [
    "ConfigError", "RunConfig", "build_params", "load_config", "parse_config",
    "SUITES", "Check", "SuiteResult", "run_suite",
    "Axis", "EngineOptions", "SweepSpec", "evaluate", "iso_rate_curve", "iso_rate_point", "preset_series",
    "run_sweep", "sweep_distance", "sweep_memory",
    "ResultTable", "tables_equal",
]
