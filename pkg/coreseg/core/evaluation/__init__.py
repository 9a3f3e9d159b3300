from .metrics import RocCurve, auroc_unknown, roc_curve, trapezoid_area
from .scenario import (CSV_FIELDS, Aggregate, EvalReport, aggregate,
                       evaluate_scenario, format_mean_std, reports_to_csv,
                       reports_to_json, roc_to_csv, scenario_roc)

__all__ = [
    "RocCurve", "auroc_unknown", "roc_curve", "trapezoid_area", "CSV_FIELDS",
    "Aggregate", "EvalReport", "aggregate", "evaluate_scenario",
    "format_mean_std", "reports_to_csv", "reports_to_json", "roc_to_csv",
    "scenario_roc"
]
