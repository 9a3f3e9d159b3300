import dataclasses
import typing as ty

import numpy as np

from coreseg.errors import PatchSizeError, ShapeMismatchError

IGNORE = -1

Origin = ty.Tuple[str, int, int]


@dataclasses.dataclass(frozen=True, eq=False)
class RasterPatch:
    """H×W×C image patch with channel metadata.

    Attributes
    ----------
    pixels : np.ndarray
        float32 array of shape (H, W, C).
    channel_names : tuple of str
        One name per channel, e.g. ``("IR", "R", "G", "nDSM")``.
    origin : tuple
        ``(scene_id, row_offset, col_offset)`` of the top-left pixel.
    """

    pixels: np.ndarray
    channel_names: ty.Tuple[str, ...]
    origin: Origin = ("", 0, 0)

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels, dtype=np.float32)
        if pixels.ndim != 3 or pixels.shape[0] == 0 or pixels.shape[1] == 0:
            raise ShapeMismatchError("RasterPatch", ("H", "W", "C"),
                                     pixels.shape)
        if not np.all(np.isfinite(pixels)):
            raise ValueError("RasterPatch pixels must be finite.")
        names = tuple(self.channel_names)
        if len(names) != pixels.shape[2]:
            raise ValueError(
                "{} channel names for {} channels.".format(
                    len(names), pixels.shape[2]
                )
            )
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "channel_names", names)

    @property
    def shape(self) -> ty.Tuple[int, int, int]:
        return ty.cast(ty.Tuple[int, int, int], self.pixels.shape)

    def to_chw(self) -> np.ndarray:
        """Return pixels in channel-first layout."""
        return np.ascontiguousarray(self.pixels.transpose(2, 0, 1))


@dataclasses.dataclass(frozen=True, eq=False)
class LabelMask:
    """H×W class map.

    Known classes are ``0..num_known-1``, ``UNKNOWN == num_known`` and
    ``IGNORE == -1``. Masks in original dataset ids use the number of
    original classes as ``num_known``.
    """

    labels: np.ndarray
    num_known: int

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 2:
            raise ShapeMismatchError("LabelMask", ("H", "W"), labels.shape)
        if labels.size and (labels.min() < IGNORE
                            or labels.max() > self.num_known):
            bad = labels[(labels < IGNORE) | (labels > self.num_known)]
            raise ValueError(
                "Label {} outside [-1, {}].".format(
                    int(bad.flat[0]), self.num_known
                )
            )
        object.__setattr__(self, "labels", labels)

    @property
    def UNKNOWN(self) -> int:
        return self.num_known

    @property
    def IGNORE(self) -> int:
        return IGNORE

    @property
    def shape(self) -> ty.Tuple[int, int]:
        return ty.cast(ty.Tuple[int, int], self.labels.shape)

    @property
    def known(self) -> np.ndarray:
        """Boolean map of pixels carrying a known class."""
        return (self.labels >= 0) & (self.labels < self.num_known)

    @property
    def unknown(self) -> np.ndarray:
        return self.labels == self.num_known

    @property
    def ignored(self) -> np.ndarray:
        return self.labels == IGNORE


class Scene(ty.NamedTuple):
    patch: RasterPatch
    mask: LabelMask


def _anchors(size: int, patch_size: int, stride: int) -> ty.List[int]:
    last = size - patch_size
    count = -(-last // stride) + 1
    return sorted({max(0, min(k * stride, last)) for k in range(count)})


def extract_patches(
    scene: Scene, patch_size: int, stride: int
) -> ty.List[Scene]:
    """Tile a scene with square patches on a regular grid.

    The last row and column of patches are anchored to the scene
    border, so every pixel is covered without padding.

    Parameters
    ----------
    scene : Scene
        Full image and its mask.
    patch_size : int
    stride : int
        Must be at least 1.

    Returns
    -------
    list of Scene
        Patches in row-major anchor order. Each patch origin is offset
        from the scene origin.

    Raises
    ------
    PatchSizeError
        When ``patch_size`` exceeds either scene dimension.
    """
    patch, mask = scene
    height, width, _ = patch.shape
    if stride < 1:
        raise ValueError("Stride must be at least 1, got {}.".format(stride))
    if patch_size < 1 or patch_size > min(height, width):
        raise PatchSizeError(patch_size, height, width)
    if mask.shape != (height, width):
        raise ShapeMismatchError("scene mask", (height, width), mask.shape)
    scene_id, row0, col0 = patch.origin
    out = []
    for row in _anchors(height, patch_size, stride):
        for col in _anchors(width, patch_size, stride):
            window = (slice(row, row + patch_size),
                      slice(col, col + patch_size))
            out.append(
                Scene(
                    RasterPatch(
                        patch.pixels[window], patch.channel_names,
                        (scene_id, row0 + row, col0 + col)
                    ),
                    LabelMask(mask.labels[window], mask.num_known),
                )
            )
    return out


def flip(scene: Scene, horizontal: bool, vertical: bool) -> Scene:
    """Return ``scene`` flipped along the requested axes."""
    pixels, labels = scene.patch.pixels, scene.mask.labels
    if horizontal:
        pixels, labels = pixels[:, ::-1], labels[:, ::-1]
    if vertical:
        pixels, labels = pixels[::-1], labels[::-1]
    return Scene(
        RasterPatch(np.ascontiguousarray(pixels), scene.patch.channel_names,
                    scene.patch.origin),
        LabelMask(np.ascontiguousarray(labels), scene.mask.num_known),
    )
