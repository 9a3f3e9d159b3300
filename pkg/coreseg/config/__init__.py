"""Experiment configuration: INI parsing, schema and hashing."""

from .config import CaseInsensitiveDict, Config
from .schema import (ArchitectureConfig, DatasetConfig, ExperimentConfig,
                     OpensetConfig, ReportConfig, ScenarioConfig,
                     config_hash, load_config)

__all__ = [
    "CaseInsensitiveDict", "Config", "ArchitectureConfig", "DatasetConfig",
    "ExperimentConfig", "OpensetConfig", "ReportConfig", "ScenarioConfig",
    "config_hash", "load_config"
]
