import typing as ty

import torch
import torch.nn as nn

from coreseg.core.backbone import (ArchDescriptor, DoubleConv,
                                   EncoderFeatures, upsample_to)
from coreseg.core.conditioning import (ConditionedFeatures, FiLMEncoder,
                                       encode_condition, modulate)
from coreseg.errors import ShapeMismatchError


class ReconstructionDecoder(nn.Module):
    """Decoder ``d_B .. d_1`` rebuilding the input from frozen features.

    Stage ``i`` consumes the channel concatenation
    ``[previous activation, f_i, e_i]``; the deepest stage uses the
    latent ``e_B`` as previous activation. Output goes through a 1×1
    convolution and a sigmoid, matching inputs scaled to [0, 1].
    """

    def __init__(self, arch: ArchDescriptor) -> None:
        super().__init__()
        self.arch = arch
        self.stages = nn.ModuleList(
            DoubleConv(c, w) for c, w in
            zip(self.stage_in_channels, reversed(arch.widths))
        )
        self.head = nn.Conv2d(arch.widths[0], arch.in_channels, 1)

    @property
    def stage_in_channels(self) -> ty.List[int]:
        """Input channels of each stage, deepest first."""
        widths = self.arch.widths
        out = []
        for i in reversed(range(self.arch.blocks)):
            prev = widths[i] if i == self.arch.blocks - 1 else widths[i + 1]
            out.append(prev + 2 * widths[i])
        return out

    def forward(self, e: EncoderFeatures,
                f: ConditionedFeatures) -> torch.Tensor:
        if len(e.blocks) != self.arch.blocks or len(f.blocks) != len(e.blocks):
            raise ShapeMismatchError(
                "decoder block count", (self.arch.blocks,),
                (len(e.blocks), len(f.blocks))
            )
        x = e.latent
        for stage, i in zip(self.stages, reversed(range(self.arch.blocks))):
            skip, film = e.blocks[i], f.blocks[i]
            if film.shape != skip.shape:
                raise ShapeMismatchError("f_{}".format(i + 1), skip.shape,
                                         film.shape)
            if x.shape[-2:] != skip.shape[-2:]:
                x = upsample_to(x, skip)
            x = stage(torch.cat([x, film, skip], dim=1))
        return torch.sigmoid(self.head(x))


class ConditionalAutoEncoder(nn.Module):
    """FiLM conditioning encoders plus the reconstruction decoder."""

    def __init__(self, arch: ArchDescriptor, init_scale: float = 1e-4
                 ) -> None:
        super().__init__()
        self.arch = arch
        self.film = FiLMEncoder(arch, init_scale)
        self.decoder = ReconstructionDecoder(arch)

    def forward(self, e: EncoderFeatures, cond: torch.Tensor) -> torch.Tensor:
        """Reconstruct the input of ``e`` conditioned on ``cond``.

        ``cond`` must have the spatial size of the input patch.
        """
        height, width = e.blocks[0].shape[-2:]
        if cond.shape[-2:] != (height, width) or cond.shape[0] != \
                e.blocks[0].shape[0]:
            raise ShapeMismatchError(
                "conditioning map",
                (e.blocks[0].shape[0], self.arch.num_classes, height, width),
                cond.shape
            )
        return decode(e, modulate(e, encode_condition(cond, self.film)),
                      self.decoder)


def decode(e: EncoderFeatures, f: ConditionedFeatures,
           decoder: ReconstructionDecoder) -> torch.Tensor:
    """Reconstruct an N×C×H×W batch from frozen and conditioned features.

    Raises
    ------
    ShapeMismatchError
        When a block of ``f`` does not align with ``e``.
    """
    return decoder(e, f)
