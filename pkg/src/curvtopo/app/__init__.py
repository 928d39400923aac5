"""Configuration, presets, output writers, studies and the command line."""

from .config import PRESETS, ConfigError, RunConfig, build_problem, load_config, parse_config
from .runner import optimize, perf_table, run_case
