from .artifacts import KINDS, StageArtifact
from .pipeline import (SPLITS, STAGES, Calibration, Pipeline, PreparedData,
                       SplitScores, sweep_split)
from .suite import SuiteResult, run_loco_suite, run_scenario, write_suite

__all__ = [
    "KINDS", "StageArtifact", "SPLITS", "STAGES", "Calibration", "Pipeline",
    "PreparedData", "SplitScores", "sweep_split", "SuiteResult",
    "run_loco_suite", "run_scenario", "write_suite"
]
