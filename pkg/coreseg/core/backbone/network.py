"""U-net style closed-set segmentation network."""

import dataclasses
import typing as ty

import torch
import torch.nn as nn
import torch.nn.functional as F

from coreseg.errors import (ChannelMismatchError, DivisibilityError,
                            ShapeMismatchError)


@dataclasses.dataclass(frozen=True)
class ArchDescriptor:
    """Architecture of the closed-set encoder and everything mirroring it.

    Attributes
    ----------
    blocks : int
        Encoder blocks B; block ``i`` works at ``1 / 2**i`` resolution.
    base_width : int
        Channels of the first block; doubled at each following block.
    num_classes : int
        Known classes K.
    in_channels : int
        Input channels C.
    """

    blocks: int = 4
    base_width: int = 32
    num_classes: int = 2
    in_channels: int = 4

    def __post_init__(self) -> None:
        if self.blocks < 2:
            raise ValueError("blocks must be >= 2, got {}".format(self.blocks))
        if min(self.base_width, self.num_classes, self.in_channels) <= 0:
            raise ValueError("widths and class count must be positive")

    @property
    def widths(self) -> ty.Tuple[int, ...]:
        return tuple(self.base_width * 2**i for i in range(self.blocks))

    @property
    def divisor(self) -> int:
        return 2**(self.blocks - 1)

    def check_input(self, x: torch.Tensor) -> None:
        """Validate an N×C×H×W batch against this descriptor."""
        if x.dim() != 4:
            raise ShapeMismatchError("input batch", ("N", "C", "H", "W"),
                                     x.shape)
        if x.shape[1] != self.in_channels:
            raise ChannelMismatchError(self.in_channels, x.shape[1])
        height, width = x.shape[-2:]
        if height % self.divisor or width % self.divisor:
            raise DivisibilityError(height, width, self.divisor)

    def block_shapes(self, height: int, width: int
                     ) -> ty.List[ty.Tuple[int, int, int]]:
        """Return (channels, height, width) of every encoder block."""
        return [(w, height // 2**i, width // 2**i)
                for i, w in enumerate(self.widths)]


@dataclasses.dataclass(frozen=True)
class EncoderFeatures:
    """Per-block encoder activations ``e_1 .. e_B``, each N×C_i×H_i×W_i."""

    blocks: ty.Tuple[torch.Tensor, ...]

    @property
    def latent(self) -> torch.Tensor:
        return self.blocks[-1]

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self) -> ty.Iterator[torch.Tensor]:
        return iter(self.blocks)

    def __getitem__(self, index: int) -> torch.Tensor:
        return self.blocks[index]


class DoubleConv(nn.Module):

    def __init__(self, in_ch: int, out_ch: int) -> None:
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(in_ch, out_ch, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(out_ch, out_ch, 3, padding=1),
            nn.ReLU(inplace=True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class Encoder(nn.Module):
    """Stack of DoubleConv blocks separated by 2×2 max pooling.

    Used as the closed-set encoder and, with ``in_channels = K``, as
    the body of the conditioning encoders.
    """

    def __init__(self, in_channels: int, widths: ty.Sequence[int]) -> None:
        super().__init__()
        self.blocks = nn.ModuleList()
        for width in widths:
            self.blocks.append(DoubleConv(in_channels, width))
            in_channels = width

    def forward(self, x: torch.Tensor) -> EncoderFeatures:
        out = []
        for i, block in enumerate(self.blocks):
            if i:
                x = F.max_pool2d(x, 2)
            x = block(x)
            out.append(x)
        return EncoderFeatures(tuple(out))


def upsample_to(x: torch.Tensor, like: torch.Tensor) -> torch.Tensor:
    return F.interpolate(
        x, size=like.shape[-2:], mode="bilinear", align_corners=False
    )


class UNet(nn.Module):
    """Closed-set segmentation network.

    ``forward`` returns both the N×K×H×W logits and the encoder
    features consumed downstream.
    """

    def __init__(self, arch: ArchDescriptor) -> None:
        super().__init__()
        self.arch = arch
        widths = arch.widths
        self.encoder = Encoder(arch.in_channels, widths)
        self.decoder = nn.ModuleList(
            DoubleConv(widths[i + 1] + widths[i], widths[i])
            for i in reversed(range(arch.blocks - 1))
        )
        self.head = nn.Conv2d(widths[0], arch.num_classes, 1)

    def encode(self, x: torch.Tensor) -> EncoderFeatures:
        self.arch.check_input(x)
        return self.encoder(x)

    def segment(self, features: EncoderFeatures) -> torch.Tensor:
        x = features.latent
        skips = features.blocks[-2::-1]
        for stage, skip in zip(self.decoder, skips):
            if x.shape[-2:] != skip.shape[-2:]:
                x = upsample_to(x, skip)
            x = stage(torch.cat([x, skip], dim=1))
        return self.head(x)

    def forward(
        self, x: torch.Tensor
    ) -> ty.Tuple[torch.Tensor, EncoderFeatures]:
        features = self.encode(x)
        return self.segment(features), features


def build_backbone(
    arch: ArchDescriptor, seed: ty.Optional[int] = None
) -> UNet:
    """Return an untrained :class:`UNet`.

    Parameters
    ----------
    arch : ArchDescriptor
    seed : int, optional
        When given, parameter initialization is seeded.
    """
    if seed is not None:
        torch.manual_seed(seed)
    return UNet(arch)
