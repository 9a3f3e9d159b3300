"""Unknown-pixel detection metrics."""

import dataclasses
import typing as ty

import numpy as np
from scipy.stats import rankdata

from coreseg.errors import ShapeMismatchError, UndefinedAUROCError


@dataclasses.dataclass(frozen=True, eq=False)
class RocCurve:
    """Stepwise ROC over the distinct score values.

    ``thresholds`` are decreasing; point ``i`` classifies
    ``score >= thresholds[i]`` as unknown. The first point is (0, 0)
    with an infinite threshold.
    """

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auroc: float


def _prepare(
    scores: ty.Any, truth: ty.Any, ignore: ty.Optional[ty.Any]
) -> ty.Tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    truth = np.asarray(truth, dtype=bool).ravel()
    if scores.shape != truth.shape:
        raise ShapeMismatchError("truth", scores.shape, truth.shape)
    if ignore is not None:
        keep = ~np.asarray(ignore, dtype=bool).ravel()
        if keep.shape != scores.shape:
            raise ShapeMismatchError("ignore mask", scores.shape, keep.shape)
        scores, truth = scores[keep], truth[keep]
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUROCError(n_pos, n_neg)
    return scores, truth


def auroc_unknown(scores: ty.Any, truth: ty.Any,
                  ignore: ty.Optional[ty.Any] = None) -> float:
    """Probability that an unknown pixel outscores a known one.

    Ties count 1/2 (Mann-Whitney U divided by ``n_unknown * n_known``),
    computed from average ranks in O(n log n). Higher scores mean
    "more unknown", so raw minimum errors are used as is.

    Parameters
    ----------
    scores : array-like
    truth : array-like of bool
        True where the pixel is unknown.
    ignore : array-like of bool, optional
        Pixels left out of the computation.

    Raises
    ------
    UndefinedAUROCError
        When only one of unknown/known remains after ignoring.
    """
    scores, truth = _prepare(scores, truth, ignore)
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    ranks = rankdata(scores)
    u = ranks[truth].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def trapezoid_area(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) / 2.0))


def roc_curve(scores: ty.Any, truth: ty.Any,
              ignore: ty.Optional[ty.Any] = None) -> RocCurve:
    """ROC of unknown detection with one point per distinct score.

    Raises
    ------
    UndefinedAUROCError
        When only one of unknown/known is present.
    """
    scores, truth = _prepare(scores, truth, ignore)
    order = np.argsort(-scores, kind="mergesort")
    scores, truth = scores[order], truth[order]
    # Last index of every run of equal scores.
    cut = np.r_[np.flatnonzero(np.diff(scores)), scores.size - 1]
    tps = np.cumsum(truth)[cut]
    fps = (cut + 1) - tps
    tpr = np.r_[0.0, tps / tps[-1]]
    fpr = np.r_[0.0, fps / fps[-1]]
    thresholds = np.r_[np.inf, scores[cut]]
    return RocCurve(thresholds, tpr, fpr, trapezoid_area(fpr, tpr))
