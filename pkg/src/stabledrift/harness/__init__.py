"""Configuration, experiment orchestration and the command-line interface."""

from .config import ConfigError, ExperimentConfig, ResourceError, load_config
from .experiments import Check, RunReport, reproduce, run, run_many

__all__ = ["ConfigError", "ExperimentConfig", "ResourceError", "load_config",
           "Check", "RunReport", "reproduce", "run", "run_many"]
