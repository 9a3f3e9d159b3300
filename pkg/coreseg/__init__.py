"""Open-set semantic segmentation by conditional reconstruction.

A closed-set U-net is trained on the known classes; its frozen encoder
then feeds a conditional autoencoder whose per-pixel reconstruction
error, minimized over every known-class conditioning, flags pixels of
unseen classes.
"""

# core before config: the config schema imports core modules.
from .core import *
from . import config, errors
from .config import ExperimentConfig, config_hash, load_config

__version__ = "0.1.0"
__all__ = core.__all__ + [
    "config", "errors", "ExperimentConfig", "config_hash", "load_config"
]
