"""Logging setup shared by the library and the command line."""

import logging
import os

import psutil

logger = logging.getLogger(__name__)


def configure_logging(verbosity: int) -> None:
    """Configure the ``coreseg`` logging level.

    Parameters
    ----------
    verbosity : int
        0 for warnings only, 1 for info, 2 or more for debug.
    """
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(levelname)s - %(name)s - %(message)s",
        datefmt="%H:%M:%S",
    )
    logging.getLogger("coreseg").setLevel(level)


def log_memory(stage: str) -> None:
    """Log resident memory of the current process after ``stage``."""
    rss = psutil.Process(os.getpid()).memory_info().rss
    logger.info("%s done, resident memory %.1f MiB", stage, rss / 2**20)


def default_workers() -> int:
    """Return the number of physical cores, at least 1."""
    return psutil.cpu_count(logical=False) or 1
