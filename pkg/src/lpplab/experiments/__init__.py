"""Named experiments, their configuration and result persistence."""

from .catalog import (CATALOG, CatalogEntry, UnknownExperimentError, build_config,
                      default_config, run_experiment)
from .config import ConfigError, ExperimentConfig, load_config_file, parse_override
from .runner import (Check, ExperimentResult, ReproductionError, ResultExistsError, Verdict,
                     persist)

__all__ = [
    "CATALOG",
    "CatalogEntry",
    "Check",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "ReproductionError",
    "ResultExistsError",
    "UnknownExperimentError",
    "Verdict",
    "build_config",
    "default_config",
    "load_config_file",
    "parse_override",
    "persist",
    "run_experiment",
]
