from .sweep import (ErrorVolume, ScoreMap, min_reduce, sweep_batch,
                    sweep_conditionings)
from .threshold import (OpenSetPrediction, ThresholdSpec, balanced_accuracy,
                        calibrate_threshold, fuse, quantile_grid,
                        quantile_threshold, select_quantile)
from .io import (export_prediction, load_error_volume, load_score_map,
                 read_prediction, save_error_volume, save_score_map)

__all__ = [
    "ErrorVolume", "ScoreMap", "min_reduce", "sweep_batch",
    "sweep_conditionings", "OpenSetPrediction", "ThresholdSpec",
    "balanced_accuracy", "calibrate_threshold", "fuse", "quantile_grid",
    "quantile_threshold", "select_quantile", "export_prediction",
    "load_error_volume", "load_score_map", "read_prediction",
    "save_error_volume", "save_score_map"
]
