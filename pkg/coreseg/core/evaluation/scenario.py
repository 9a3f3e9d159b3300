import csv
import dataclasses
import io
import logging
import math
import typing as ty
import warnings

import numpy as np

from coreseg.core.data import LabelMask, LocoSpec
from coreseg.core.openset import (OpenSetPrediction, balanced_accuracy)
from coreseg.errors import (ShapeMismatchError, UndefinedAUROCError,
                            UndefinedAUROCWarning)
from coreseg.tools import json
from .metrics import RocCurve, auroc_unknown, roc_curve

logger = logging.getLogger(__name__)

CSV_FIELDS = (
    "scenario", "held_out", "status", "auroc_unknown", "closed_accuracy",
    "open_accuracy", "balanced_accuracy", "q", "tau", "oracle_q",
    "oracle_balanced_accuracy", "n_pixels", "n_known", "n_unknown",
    "n_ignored", "error"
)


@dataclasses.dataclass(frozen=True)
class EvalReport:
    """Metrics of one LOCO scenario over pooled test pixels.

    ``auroc_unknown`` is None when the scenario has no unknown (or no
    known) pixel. ``status`` is ``"failed"`` for a scenario whose
    pipeline raised; ``error`` then holds the message.
    """

    scenario: str
    held_out: ty.Tuple[str, ...]
    auroc_unknown: ty.Optional[float]
    closed_accuracy: float
    open_accuracy: float
    balanced_accuracy: float
    q: float
    tau: float
    n_pixels: int
    n_known: int
    n_unknown: int
    n_ignored: int
    oracle_q: ty.Optional[float] = None
    oracle_balanced_accuracy: ty.Optional[float] = None
    status: str = "ok"
    error: str = ""

    @classmethod
    def failed(cls, scenario: str, held_out: ty.Sequence[str],
               error: str) -> "EvalReport":
        nan = math.nan
        return cls(scenario, tuple(held_out), None, nan, nan, nan, nan, nan,
                   0, 0, 0, 0, status="failed", error=error)

    def as_row(self) -> ty.Dict[str, ty.Any]:
        row = dataclasses.asdict(self)
        row["held_out"] = "+".join(self.held_out)
        return row

    def _to_dict(self) -> ty.Dict[str, ty.Any]:
        return {
            "__coreseg__": True,
            "class": "{}.{}".format(type(self).__module__,
                                    type(self).__qualname__),
            "kwargs": {
                **dataclasses.asdict(self), "held_out": list(self.held_out)
            },
        }


def evaluate_scenario(
    predictions: ty.Sequence[OpenSetPrediction],
    truths: ty.Sequence[LabelMask],
    loco: LocoSpec,
    scenario: str = "",
) -> EvalReport:
    """Evaluate fused predictions against LOCO ground truth.

    AUROC ranks pooled minimum errors of unknown against known pixels.
    Closed-set accuracy counts only truly known pixels; open-set
    accuracy compares fused labels (UNKNOWN included) on every
    non-ignored pixel. IGNORE pixels are excluded everywhere.

    Raises
    ------
    ShapeMismatchError
        When a prediction and its truth differ in shape.
    """
    if len(predictions) != len(truths):
        raise ShapeMismatchError("truth list", (len(predictions),),
                                 (len(truths),))
    scores, truth_ids, closed, fused = [], [], [], []
    for prediction, truth in zip(predictions, truths):
        if prediction.labels.shape != truth.shape:
            raise ShapeMismatchError("truth mask", prediction.labels.shape,
                                     truth.shape)
        scores.append(prediction.score_map.min_error.ravel())
        truth_ids.append(truth.labels.ravel())
        closed.append(prediction.closed_labels.labels.ravel())
        fused.append(prediction.labels.ravel())
    score = np.concatenate(scores)
    truth = np.concatenate(truth_ids)
    closed_labels = np.concatenate(closed)
    fused_labels = np.concatenate(fused)
    k = loco.num_known
    ignored = truth < 0
    unknown = truth == k
    known = ~ignored & ~unknown
    try:
        auroc: ty.Optional[float] = auroc_unknown(score, unknown, ignored)
    except UndefinedAUROCError:
        warnings.warn(UndefinedAUROCWarning(scenario))
        auroc = None
    closed_accuracy = float((closed_labels[known] == truth[known]).mean()) \
        if known.any() else math.nan
    open_accuracy = float(
        (fused_labels[~ignored] == truth[~ignored]).mean()
    ) if (~ignored).any() else math.nan
    spec = predictions[0].spec if predictions else None
    rejected = fused_labels[~ignored] == k
    return EvalReport(
        scenario=scenario,
        held_out=loco.held_out_names,
        auroc_unknown=auroc,
        closed_accuracy=closed_accuracy,
        open_accuracy=open_accuracy,
        balanced_accuracy=balanced_accuracy(rejected, unknown[~ignored]),
        q=spec.q if spec else math.nan,
        tau=spec.tau if spec else math.nan,
        n_pixels=int(truth.size),
        n_known=int(known.sum()),
        n_unknown=int(unknown.sum()),
        n_ignored=int(ignored.sum()),
    )


@dataclasses.dataclass(frozen=True)
class Aggregate:
    """Mean ± population std of a metric over the defined scenario rows."""

    auroc_mean: float
    auroc_std: float
    closed_accuracy_mean: float
    closed_accuracy_std: float
    n_scenarios: int
    n_failed: int

    @property
    def auroc_text(self) -> str:
        return format_mean_std(self.auroc_mean, self.auroc_std)


def format_mean_std(mean: float, std: float) -> str:
    if math.isnan(mean):
        return "undefined"
    return "{:.3f} ± {:.3f}".format(mean, std)


def _mean_std(values: ty.Sequence[float]) -> ty.Tuple[float, float]:
    values = [v for v in values if v is not None and not math.isnan(v)]
    if not values:
        return math.nan, math.nan
    return float(np.mean(values)), float(np.std(values))


def aggregate(reports: ty.Sequence[EvalReport]) -> Aggregate:
    ok = [r for r in reports if r.status == "ok"]
    auroc = _mean_std([r.auroc_unknown for r in ok])
    closed = _mean_std([r.closed_accuracy for r in ok])
    return Aggregate(auroc[0], auroc[1], closed[0], closed[1], len(reports),
                     len(reports) - len(ok))


def reports_to_json(reports: ty.Sequence[EvalReport]) -> str:
    return json.dumps({
        "scenarios": [dataclasses.asdict(r) for r in reports],
        "aggregate": dataclasses.asdict(aggregate(reports)),
    })


def reports_to_csv(reports: ty.Sequence[EvalReport]) -> str:
    """One row per scenario plus a trailing ``aggregate`` row."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_FIELDS,
                            lineterminator="\n")
    writer.writeheader()
    for report in reports:
        writer.writerow(report.as_row())
    summary = aggregate(reports)
    writer.writerow({
        "scenario": "aggregate",
        "status": "{} ok / {} failed".format(
            summary.n_scenarios - summary.n_failed, summary.n_failed),
        "auroc_unknown": summary.auroc_text,
        "closed_accuracy": format_mean_std(summary.closed_accuracy_mean,
                                           summary.closed_accuracy_std),
    })
    return buffer.getvalue()


def roc_to_csv(curve: RocCurve) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("threshold", "fpr", "tpr"))
    for row in zip(curve.thresholds, curve.fpr, curve.tpr):
        writer.writerow(tuple(float(v) for v in row))
    return buffer.getvalue()


def scenario_roc(predictions: ty.Sequence[OpenSetPrediction],
                 truths: ty.Sequence[LabelMask]) -> ty.Optional[RocCurve]:
    """Pooled ROC of a scenario, or None when it is undefined.

    An empty scenario (no predictions) has no curve either.
    """
    if not predictions or not truths:
        return None
    score = np.concatenate(
        [p.score_map.min_error.ravel() for p in predictions])
    truth = np.concatenate([t.labels.ravel() for t in truths])
    k = truths[0].num_known
    try:
        return roc_curve(score, truth == k, truth < 0)
    except UndefinedAUROCError:
        return None
