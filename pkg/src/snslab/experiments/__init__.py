"""Study harness: configs, rate experiments, stopping law, invariant suite."""

from .config import ConfigError, RunConfig, load_config, parse_config
from .report import (ERROR_CSV_COLUMNS, RATES_CSV_COLUMNS, ErrorRow,
                     ErrorTable, RateFit, fit_loglog, wilson_interval,
                     write_csv)
from .temporal import TemporalResult, run_temporal_study
from .spatial import SpatialResult, run_spatial_study
from .stopping import STOPPING_CSV_COLUMNS, StoppingResult, run_stopping_study
from .invariants import CheckResult, InvariantReport, run_invariant_suite

__all__ = [
    "ConfigError", "RunConfig", "load_config", "parse_config",
    "ERROR_CSV_COLUMNS", "RATES_CSV_COLUMNS", "ErrorRow", "ErrorTable",
    "RateFit", "fit_loglog", "wilson_interval", "write_csv",
    "TemporalResult", "run_temporal_study",
    "SpatialResult", "run_spatial_study",
    "STOPPING_CSV_COLUMNS", "StoppingResult", "run_stopping_study",
    "CheckResult", "InvariantReport", "run_invariant_suite",
]
