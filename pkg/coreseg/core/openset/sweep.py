"""Condition every pixel on every known class and keep the best fit."""

import concurrent.futures
import dataclasses
import typing as ty

import numpy as np
import torch

from coreseg.core.backbone import BackboneCheckpoint, UNet, as_batch
from coreseg.core.conditioning import class_constant_batch
from coreseg.core.data import RasterPatch
from coreseg.core.reconstruction import (CAECheckpoint,
                                         ConditionalAutoEncoder,
                                         l1_error_map)
from coreseg.errors import ShapeMismatchError


@dataclasses.dataclass(frozen=True, eq=False)
class ErrorVolume:
    """H×W×K reconstruction errors, slice ``k`` conditioned on class k."""

    errors: np.ndarray
    class_names: ty.Tuple[str, ...] = ()
    origin: ty.Tuple[str, int, int] = ("", 0, 0)

    @property
    def num_known(self) -> int:
        return self.errors.shape[-1]


@dataclasses.dataclass(frozen=True, eq=False)
class ScoreMap:
    """Per-pixel minimum error over classes and the class attaining it."""

    min_error: np.ndarray
    argmin_class: np.ndarray

    @property
    def shape(self) -> ty.Tuple[int, ...]:
        return self.min_error.shape


def sweep_batch(
    backbone: UNet,
    cae: ConditionalAutoEncoder,
    x: torch.Tensor,
    num_known: int,
    workers: int = 1,
) -> torch.Tensor:
    """Return N×K×H×W errors of ``x`` under every class-constant map.

    Encoder features are computed once; the K conditioned passes only
    read parameters, so they run on a thread pool when ``workers > 1``
    and give the same result as the sequential sweep.
    """
    if num_known < 1:
        raise ValueError("Sweep needs at least one known class.")
    n, _, height, width = x.shape
    with torch.no_grad():
        e = backbone.encode(x)

    def error_for(class_id: int) -> torch.Tensor:
        # Grad mode is thread-local.
        with torch.no_grad():
            cond = class_constant_batch(class_id, n, height, width, num_known)
            return l1_error_map(x, cae(e, cond))

    if workers > 1 and num_known > 1:
        with concurrent.futures.ThreadPoolExecutor(
                max_workers=min(workers, num_known)) as pool:
            errors = list(pool.map(error_for, range(num_known)))
    else:
        errors = [error_for(k) for k in range(num_known)]
    return torch.stack(errors, dim=1)


def sweep_conditionings(
    backbone: BackboneCheckpoint,
    cae: CAECheckpoint,
    patch: ty.Union[RasterPatch, torch.Tensor],
    workers: int = 1,
    class_names: ty.Sequence[str] = (),
) -> ErrorVolume:
    """Build the ErrorVolume of a single patch.

    Raises
    ------
    ArtifactChainError
        When ``cae`` was not trained on ``backbone``.
    ChannelMismatchError, DivisibilityError
        When the patch does not fit the architecture.
    """
    cae.check_backbone(backbone)
    x = as_batch(patch)
    if x.shape[0] != 1:
        raise ShapeMismatchError("single patch", (1, "C", "H", "W"), x.shape)
    backbone.arch.check_input(x)
    volume = sweep_batch(backbone.model, cae.model, x,
                         backbone.arch.num_classes, workers)
    origin = patch.origin if isinstance(patch, RasterPatch) else ("", 0, 0)
    return ErrorVolume(
        volume[0].permute(1, 2, 0).contiguous().numpy(), tuple(class_names),
        origin
    )


def min_reduce(volume: ty.Union[ErrorVolume, np.ndarray]) -> ScoreMap:
    """Per-pixel minimum and argmin over the last (class) axis.

    Ties go to the lowest class index.

    Raises
    ------
    ValueError
        When the volume is empty or has no class slice.
    """
    errors = volume.errors if isinstance(volume, ErrorVolume) else \
        np.asarray(volume)
    if errors.ndim < 1 or errors.size == 0 or errors.shape[-1] == 0:
        raise ValueError("Cannot reduce an empty error volume.")
    return ScoreMap(errors.min(axis=-1), errors.argmin(axis=-1))
