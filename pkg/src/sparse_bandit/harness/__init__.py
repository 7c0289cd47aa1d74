from .config import ConfigError, ExperimentConfig, config_from_dict, load_config, shipped_config
from .experiment import AggregateCurve, ExperimentResult, run_experiment, summarize
from .plot import render_plot

__all__ = [
    "AggregateCurve",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "config_from_dict",
    "load_config",
    "render_plot",
    "run_experiment",
    "shipped_config",
    "summarize",
]
