import dataclasses
import math
import typing as ty

import numpy as np
import torch

from coreseg.core.data import LabelMask
from coreseg.errors import (BatchTooSmallError, NonFiniteInputError,
                            ShapeMismatchError)

NONMATCH_MODES = ("literal", "hinge")

T = ty.TypeVar("T", torch.Tensor, ty.Sequence[LabelMask])


def l1_error_map(x: torch.Tensor, xhat: torch.Tensor) -> torch.Tensor:
    """Per-pixel mean absolute error over the channel axis.

    Works on C×H×W or N×C×H×W tensors (channels at axis -3) and
    returns H×W or N×H×W.
    """
    if x.shape != xhat.shape:
        raise ShapeMismatchError("reconstruction", x.shape, xhat.shape)
    return (x - xhat).abs().mean(dim=-3)


def masked_mean(error: torch.Tensor,
                valid: ty.Optional[torch.Tensor]) -> torch.Tensor:
    """Mean of ``error`` over ``valid`` pixels (all pixels when None).

    Returns 0 (with a graph) when no pixel is valid.
    """
    if valid is None:
        return error.mean()
    if not bool(valid.any()):
        return error.sum() * 0.0
    return error[valid].mean()


@dataclasses.dataclass(frozen=True)
class LossReport:
    """Terms of ``total = match_term + alpha * nonmatch_term``.

    In hinge mode ``nonmatch_term`` is already the hinged value, the
    pixel mean of ``max(0, margin - |x - xhat_nm|)``.
    """

    total: torch.Tensor
    match_term: torch.Tensor
    nonmatch_term: torch.Tensor
    alpha: float
    mode: str = "literal"

    def as_floats(self) -> ty.Dict[str, float]:
        return {
            "total": float(self.total),
            "match_term": float(self.match_term),
            "nonmatch_term": float(self.nonmatch_term),
            "alpha": self.alpha,
        }


def _check_finite(name: str, x: torch.Tensor) -> None:
    if not bool(torch.isfinite(x).all()):
        raise NonFiniteInputError(name)


def training_loss(
    x: torch.Tensor,
    xhat_m: torch.Tensor,
    xhat_nm: torch.Tensor,
    alpha: float,
    valid: ty.Optional[torch.Tensor] = None,
    mode: str = "literal",
    margin: float = 0.5,
    nonmatch_valid: ty.Optional[torch.Tensor] = None,
) -> LossReport:
    """Match/non-match reconstruction loss.

    ``literal`` mode is ``L1(x, xhat_m) + alpha * L1(x, xhat_nm)``;
    ``hinge`` mode replaces the second L1 by the mean over pixels of
    ``max(0, margin - |x - xhat_nm|)``, so every wrongly conditioned
    pixel is pushed past the margin on its own. L1 is the mean over
    ``valid`` pixels of the channel-mean absolute error.

    ``nonmatch_valid`` restricts the second term further (defaults to
    ``valid``); pixels whose non-match label equals their own label
    belong out of it.

    Raises
    ------
    NonFiniteInputError
        When ``alpha`` or any input is not finite.
    ValueError
        When ``mode`` is unknown.
    """
    if mode not in NONMATCH_MODES:
        raise ValueError("mode must be one of {}, got {!r}".format(
            NONMATCH_MODES, mode))
    if not math.isfinite(alpha):
        raise NonFiniteInputError("alpha")
    for name, tensor in (("x", x), ("xhat_m", xhat_m), ("xhat_nm", xhat_nm)):
        _check_finite(name, tensor)
    if nonmatch_valid is None:
        nonmatch_valid = valid
    match = masked_mean(l1_error_map(x, xhat_m), valid)
    error = l1_error_map(x, xhat_nm)
    if mode == "hinge":
        error = torch.clamp(margin - error, min=0.0)
    nonmatch = masked_mean(error, nonmatch_valid)
    return LossReport(match + alpha * nonmatch, match, nonmatch, alpha, mode)


def derangement(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random permutation of ``range(n)`` without fixed points.

    Sattolo's shuffle: the result is a single cycle, so ``perm[i] != i``
    for every ``i``.
    """
    if n < 2:
        raise BatchTooSmallError(n)
    perm = np.arange(n)
    for i in range(n - 1, 0, -1):
        j = int(rng.integers(0, i))
        perm[i], perm[j] = perm[j], perm[i]
    return perm


def sample_nonmatch_mask(
    masks: T, rng: ty.Union[np.random.Generator, int]
) -> ty.Tuple[T, np.ndarray]:
    """Pair every image of a batch with the mask of another image.

    Parameters
    ----------
    masks : torch.Tensor or sequence of LabelMask
        N×H×W tensor or list of N masks.
    rng : numpy Generator or int seed

    Returns
    -------
    tuple
        Permuted masks (same type as ``masks``) and the permutation;
        image ``i`` gets mask ``perm[i]``.

    Raises
    ------
    BatchTooSmallError
        When the batch holds fewer than 2 masks.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    perm = derangement(len(masks), rng)
    if isinstance(masks, torch.Tensor):
        return masks[torch.from_numpy(perm)], perm
    return type(masks)(masks[i] for i in perm), perm
