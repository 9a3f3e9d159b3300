import dataclasses
import logging
import typing as ty

import numpy as np

from coreseg.core.data import LabelMask
from coreseg.errors import (EmptyScoresError, QuantileRangeError,
                            ShapeMismatchError)
from .sweep import ScoreMap

logger = logging.getLogger(__name__)

Scores = ty.Union[np.ndarray, ty.Iterable[np.ndarray]]

SOURCES = ("validation", "test-sweep")


@dataclasses.dataclass(frozen=True)
class ThresholdSpec:
    """Quantile ``q`` of a score population and the threshold it gives.

    Pixels with ``min_error < tau`` are known; the others unknown.
    """

    q: float
    tau: float
    calibration_source: str = "validation"


def quantile_grid(start: float = 0.05, stop: float = 0.95,
                  step: float = 0.05) -> ty.Tuple[float, ...]:
    """Inclusive, evenly spaced quantile grid."""
    count = int(round((stop - start) / step)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


def _pool(scores: Scores) -> np.ndarray:
    # Keeps the score dtype; the q = 1 boundary depends on it.
    if isinstance(scores, np.ndarray):
        return scores.ravel()
    chunks = [np.asarray(chunk).ravel() for chunk in scores]
    return np.concatenate(chunks) if chunks else np.empty(0)


def _wide(scores: np.ndarray) -> np.ndarray:
    return scores.astype(np.float64, copy=False)


def quantile_threshold(pooled: np.ndarray, q: float) -> float:
    """Linear-interpolation quantile with open boundaries.

    ``q = 1`` returns the next float above the maximum in the dtype of
    ``pooled`` (float64 for integer scores), so no pixel is rejected;
    ``q = 0`` returns the minimum, so every pixel is. Thresholds are
    compared against scores widened to float64.
    """
    if not 0.0 <= q <= 1.0:
        raise QuantileRangeError(q)
    if pooled.size == 0:
        raise EmptyScoresError()
    if q == 1.0:
        top = pooled.max()
        if not np.issubdtype(pooled.dtype, np.floating):
            top = np.float64(top)
        return float(np.nextafter(top, top.dtype.type(np.inf)))
    return float(np.quantile(_wide(pooled), q, method="linear"))


def calibrate_threshold(scores: Scores, q: float,
                        source: str = "validation") -> ThresholdSpec:
    """Set ``tau`` at the ``q``-quantile of pooled minimum errors.

    Parameters
    ----------
    scores : array or iterable of arrays
        Minimum-error scores; chunks streamed from several patches are
        pooled.
    q : float
        In ``[0, 1]``.
    source : str
        ``"validation"`` or ``"test-sweep"``.

    Raises
    ------
    EmptyScoresError
        When no score is given.
    QuantileRangeError
        When ``q`` is outside ``[0, 1]``.
    """
    if source not in SOURCES:
        raise ValueError("source must be one of {}".format(SOURCES))
    return ThresholdSpec(q, quantile_threshold(_pool(scores), q), source)


def balanced_accuracy(rejected: np.ndarray, is_unknown: np.ndarray) -> float:
    """Mean of unknown recall and known specificity."""
    unknown = is_unknown.astype(bool)
    parts = []
    if unknown.any():
        parts.append(float(rejected[unknown].mean()))
    if (~unknown).any():
        parts.append(float((~rejected[~unknown]).mean()))
    return float(np.mean(parts)) if parts else float("nan")


def select_quantile(
    scores: np.ndarray,
    is_unknown: np.ndarray,
    grid: ty.Sequence[float] = quantile_grid(),
    ignore: ty.Optional[np.ndarray] = None,
    source: str = "validation",
) -> ty.Tuple[ThresholdSpec, ty.List[ty.Tuple[float, float]]]:
    """Pick the grid quantile with the best known/unknown balanced accuracy.

    The lowest ``q`` wins ties. Returns the chosen spec and the
    ``(q, balanced_accuracy)`` table of the whole grid.
    """
    scores = np.asarray(scores).ravel()
    is_unknown = np.asarray(is_unknown, dtype=bool).ravel()
    if ignore is not None:
        keep = ~np.asarray(ignore, dtype=bool).ravel()
        scores, is_unknown = scores[keep], is_unknown[keep]
    if scores.size == 0:
        raise EmptyScoresError()
    table = []
    best: ty.Optional[ThresholdSpec] = None
    best_accuracy = -np.inf
    wide = _wide(scores)
    for q in grid:
        spec = calibrate_threshold(scores, q, source)
        accuracy = balanced_accuracy(wide >= spec.tau, is_unknown)
        table.append((q, accuracy))
        if accuracy > best_accuracy:
            best, best_accuracy = spec, accuracy
    assert best is not None
    logger.info("Selected q=%.2f (tau=%.5f, balanced accuracy %.4f) on %s",
                best.q, best.tau, best_accuracy, source)
    return best, table


@dataclasses.dataclass(frozen=True, eq=False)
class OpenSetPrediction:
    """Fused labels in ``0..K-1`` plus UNKNOWN (``K``)."""

    labels: np.ndarray
    score_map: ScoreMap
    spec: ThresholdSpec
    closed_labels: LabelMask

    @property
    def num_known(self) -> int:
        return self.closed_labels.num_known

    def as_mask(self) -> LabelMask:
        return LabelMask(self.labels, self.num_known)


def fuse(closed: LabelMask, score: ScoreMap,
         spec: ThresholdSpec) -> OpenSetPrediction:
    """Keep the closed-set label where ``min_error < tau``, else UNKNOWN.

    Raises
    ------
    ShapeMismatchError
        When the score map and closed labels differ in shape.
    """
    if closed.shape != score.shape:
        raise ShapeMismatchError("score map", closed.shape, score.shape)
    rejected = _wide(np.asarray(score.min_error)) >= spec.tau
    labels = np.where(rejected, closed.num_known, closed.labels)
    return OpenSetPrediction(labels.astype(np.int64), score, spec, closed)
