"""Pixelwise FiLM conditioning of frozen encoder features."""

import dataclasses
import typing as ty

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from coreseg.core.backbone import ArchDescriptor, Encoder, EncoderFeatures
from coreseg.errors import ClassIndexError, ShapeMismatchError


@dataclasses.dataclass(frozen=True, eq=False)
class ConditioningMap:
    """H×W×K one-hot class map; every pixel carries exactly one class."""

    onehot: np.ndarray

    def __post_init__(self) -> None:
        onehot = np.asarray(self.onehot, dtype=np.float32)
        if onehot.ndim != 3:
            raise ShapeMismatchError("ConditioningMap", ("H", "W", "K"),
                                     onehot.shape)
        if not (np.isin(onehot, (0.0, 1.0)).all()
                and (onehot.sum(axis=-1) == 1).all()):
            raise ValueError("ConditioningMap must be one-hot at every pixel.")
        object.__setattr__(self, "onehot", onehot)

    @property
    def num_known(self) -> int:
        return self.onehot.shape[2]

    @classmethod
    def from_labels(cls, labels: np.ndarray,
                    num_known: int) -> "ConditioningMap":
        labels = np.asarray(labels)
        if labels.size and (labels.min() < 0 or labels.max() >= num_known):
            raise ClassIndexError(int(labels.max()), num_known)
        return cls(np.eye(num_known, dtype=np.float32)[labels])

    def to_tensor(self) -> torch.Tensor:
        """Return the map as a 1×K×H×W tensor."""
        return torch.from_numpy(
            np.ascontiguousarray(self.onehot.transpose(2, 0, 1))
        ).unsqueeze(0)


def class_constant_map(class_id: int, height: int, width: int,
                       num_known: int) -> ConditioningMap:
    """Condition every pixel on ``class_id``.

    Raises
    ------
    ClassIndexError
        When ``class_id`` is not in ``0..num_known-1``.
    """
    if not 0 <= class_id < num_known:
        raise ClassIndexError(class_id, num_known)
    onehot = np.zeros((height, width, num_known), np.float32)
    onehot[..., class_id] = 1.0
    return ConditioningMap(onehot)


def class_constant_batch(class_id: int, batch: int, height: int, width: int,
                         num_known: int) -> torch.Tensor:
    """N×K×H×W tensor of :func:`class_constant_map`."""
    if not 0 <= class_id < num_known:
        raise ClassIndexError(class_id, num_known)
    cond = torch.zeros(batch, num_known, height, width)
    cond[:, class_id] = 1.0
    return cond


def onehot_condition(labels: torch.Tensor, num_known: int) -> torch.Tensor:
    """One-hot encode N×H×W labels in ``0..K-1`` as N×K×H×W floats."""
    if labels.numel() and (int(labels.min()) < 0
                           or int(labels.max()) >= num_known):
        raise ClassIndexError(int(labels.max()), num_known)
    return F.one_hot(labels, num_known).permute(0, 3, 1, 2).float()


def fill_unlabelled(labels: torch.Tensor, closed: torch.Tensor,
                    num_known: int) -> torch.Tensor:
    """Replace UNKNOWN and IGNORE labels by the closed-set prediction."""
    known = (labels >= 0) & (labels < num_known)
    return torch.where(known, labels, closed)


@dataclasses.dataclass(frozen=True)
class FiLMParams:
    """Per-block ``(gamma_i, beta_i)``, each shaped like ``e_i``."""

    gammas: ty.Tuple[torch.Tensor, ...]
    betas: ty.Tuple[torch.Tensor, ...]

    def __post_init__(self) -> None:
        if len(self.gammas) != len(self.betas):
            raise ValueError("gammas and betas have different block counts")
        for i, (g, b) in enumerate(zip(self.gammas, self.betas)):
            if g.shape != b.shape:
                raise ShapeMismatchError("beta_{}".format(i + 1), g.shape,
                                         b.shape)


@dataclasses.dataclass(frozen=True)
class ConditionedFeatures:
    """Per-block ``f_i = gamma_i * e_i + beta_i``."""

    blocks: ty.Tuple[torch.Tensor, ...]

    def __len__(self) -> int:
        return len(self.blocks)

    def __getitem__(self, index: int) -> torch.Tensor:
        return self.blocks[index]


class ConditionEncoder(nn.Module):
    """Encoder mirroring the closed-set encoder, fed a one-hot map.

    Each block ends with a 1×1 head whose weights start near zero and
    whose bias starts at ``bias``; the head output is the per-block
    FiLM coefficient.
    """

    def __init__(self, arch: ArchDescriptor, bias: float,
                 init_scale: float = 1e-4) -> None:
        super().__init__()
        self.body = Encoder(arch.num_classes, arch.widths)
        self.heads = nn.ModuleList(
            nn.Conv2d(width, width, 1) for width in arch.widths
        )
        self.bias = bias
        for head in self.heads:
            nn.init.normal_(head.weight, std=init_scale)
            nn.init.constant_(head.bias, bias)

    def forward(self, cond: torch.Tensor) -> ty.Tuple[torch.Tensor, ...]:
        features = self.body(cond)
        return tuple(head(e) for head, e in zip(self.heads, features))

    @torch.no_grad()
    def force_constant(self) -> None:
        """Make every head output exactly ``bias``."""
        for head in self.heads:
            head.weight.zero_()
            head.bias.fill_(self.bias)


class FiLMEncoder(nn.Module):
    """The gamma and beta conditioning encoders.

    Both see the same one-hot map and have separate parameters. At
    initialization gamma is close to 1 and beta close to 0, so
    modulation starts near the identity.
    """

    def __init__(self, arch: ArchDescriptor, init_scale: float = 1e-4
                 ) -> None:
        super().__init__()
        self.arch = arch
        self.gamma = ConditionEncoder(arch, 1.0, init_scale)
        self.beta = ConditionEncoder(arch, 0.0, init_scale)

    def forward(self, cond: torch.Tensor) -> FiLMParams:
        return FiLMParams(self.gamma(cond), self.beta(cond))

    def force_identity(self) -> None:
        """Set gamma to exactly 1 and beta to exactly 0 everywhere."""
        self.gamma.force_constant()
        self.beta.force_constant()


def encode_condition(cond: ty.Union[ConditioningMap, torch.Tensor],
                     film: FiLMEncoder) -> FiLMParams:
    """Encode a conditioning map into per-block FiLM parameters.

    Raises
    ------
    ShapeMismatchError
        When the map has the wrong class count.
    DivisibilityError
        When its spatial size is not divisible by ``2**(B-1)``.
    """
    if isinstance(cond, ConditioningMap):
        cond = cond.to_tensor()
    arch = film.arch
    if cond.dim() != 4 or cond.shape[1] != arch.num_classes:
        raise ShapeMismatchError(
            "conditioning map", ("N", arch.num_classes, "H", "W"), cond.shape
        )
    dataclasses.replace(arch, in_channels=arch.num_classes).check_input(cond)
    return film(cond)


def modulate(e: EncoderFeatures, params: FiLMParams) -> ConditionedFeatures:
    """Apply ``f_i = gamma_i * e_i + beta_i`` block by block.

    Raises
    ------
    ShapeMismatchError
        When block counts or any block shape differ.
    """
    if len(e.blocks) != len(params.gammas):
        raise ShapeMismatchError("FiLM block count", (len(e.blocks),),
                                 (len(params.gammas),))
    out = []
    for i, (block, gamma, beta) in enumerate(
            zip(e.blocks, params.gammas, params.betas)):
        if gamma.shape != block.shape:
            raise ShapeMismatchError("gamma_{}".format(i + 1), block.shape,
                                     gamma.shape)
        out.append(gamma * block + beta)
    return ConditionedFeatures(tuple(out))
