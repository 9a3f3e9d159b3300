"""Define tools such as the artifact json codec and parameter guards."""

from .files import atomic_path, write_bytes, write_text
from .guards import frozen_parameters, parameter_fingerprint, stage
from .log import configure_logging, default_workers, log_memory
from .seed import set_random_seeds, torch_generator

__all__ = [
    "atomic_path", "write_bytes", "write_text", "frozen_parameters",
    "parameter_fingerprint", "stage", "configure_logging",
    "default_workers", "log_memory", "set_random_seeds", "torch_generator"
]
