"""Configuration, presets and the experiment runner behind the command line tool."""

from .config import ConfigError, ExperimentConfig, build_problem, load_config, parse_config
from .presets import get_preset, presets
from .runner import ResultRecord, run
