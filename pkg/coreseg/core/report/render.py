"""Turn label maps, score maps and patches into RGB images."""

import io
import pathlib
import typing as ty

import numpy as np
from matplotlib import colormaps
from PIL import Image

from coreseg.core.data import IGNORE, LabelMask, RasterPatch
from coreseg.core.openset import OpenSetPrediction, ScoreMap
from coreseg.errors import EmptyScoresError, PaletteError
from coreseg.tools import write_bytes
from .palette import Palette

Labels = ty.Union[OpenSetPrediction, LabelMask, np.ndarray]

HEATMAP_RAMP = "inferno"
RAMP_LEVELS = 256


def _labels(labels: Labels) -> np.ndarray:
    if isinstance(labels, OpenSetPrediction):
        return labels.labels
    if isinstance(labels, LabelMask):
        return labels.labels
    return np.asarray(labels)


def render_prediction(labels: Labels, palette: Palette) -> np.ndarray:
    """Map every label to its palette colour.

    Returns
    -------
    np.ndarray
        H×W×3 uint8 image.

    Raises
    ------
    PaletteError
        When a label has no palette entry.
    """
    labels = _labels(labels)
    palette.check(labels)
    index = np.where(labels == IGNORE, palette.num_known + 1, labels)
    return palette.lut()[index]


def _pack(rgb: np.ndarray) -> np.ndarray:
    rgb = rgb.astype(np.int64)
    return (rgb[..., 0] << 16) | (rgb[..., 1] << 8) | rgb[..., 2]


def decode_colors(image: np.ndarray, palette: Palette) -> np.ndarray:
    """Inverse of :func:`render_prediction`.

    Raises
    ------
    PaletteError
        When the image holds a colour outside the palette; the error
        lists the packed ``0xRRGGBB`` values.
    """
    inverse = palette.inverse()
    keys = _pack(np.asarray(list(inverse), dtype=np.int64))
    order = np.argsort(keys)
    keys, values = keys[order], np.asarray(list(inverse.values()))[order]
    packed = _pack(np.asarray(image))
    position = np.clip(np.searchsorted(keys, packed), 0, len(keys) - 1)
    unknown = keys[position] != packed
    if unknown.any():
        raise PaletteError(np.unique(packed[unknown]).tolist())
    return values[position].astype(np.int64)


def heatmap_positions(
    min_error: np.ndarray,
    policy: str = "minmax",
    value_range: ty.Tuple[float, float] = (0.0, 1.0),
) -> np.ndarray:
    """Ramp position in ``[0, 1]`` of every score.

    ``"minmax"`` stretches each image to its own range (a constant map
    sits at 0); ``"fixed"`` clips to ``value_range`` so equal scores get
    equal positions across images.
    """
    scores = np.asarray(min_error, dtype=np.float64)
    if scores.size == 0:
        raise EmptyScoresError()
    if policy == "minmax":
        low, high = float(scores.min()), float(scores.max())
    elif policy == "fixed":
        low, high = value_range
    else:
        raise ValueError("Unknown heatmap policy {!r}".format(policy))
    if high <= low:
        return np.zeros_like(scores)
    return np.clip((scores - low) / (high - low), 0.0, 1.0)


def ramp_lut(name: str = HEATMAP_RAMP) -> np.ndarray:
    colours = colormaps[name](np.linspace(0.0, 1.0, RAMP_LEVELS))[:, :3]
    return np.round(colours * 255).astype(np.uint8)


def render_error_heatmap(
    score: ty.Union[ScoreMap, np.ndarray],
    policy: str = "minmax",
    value_range: ty.Tuple[float, float] = (0.0, 1.0),
) -> np.ndarray:
    """Colour the per-pixel minimum error on a monotone ramp."""
    min_error = score.min_error if isinstance(score, ScoreMap) else score
    position = heatmap_positions(min_error, policy, value_range)
    index = np.floor(position * (RAMP_LEVELS - 1) + 0.5).astype(np.int64)
    return ramp_lut()[index]


def false_colour(patch: ty.Union[RasterPatch, np.ndarray]) -> np.ndarray:
    """First three channels as RGB (IR-R-G for ISPRS inputs)."""
    pixels = patch.pixels if isinstance(patch, RasterPatch) else \
        np.asarray(patch)
    channels = [pixels[..., min(c, pixels.shape[-1] - 1)] for c in range(3)]
    rgb = np.stack(channels, axis=-1)
    return np.round(np.clip(rgb, 0.0, 1.0) * 255).astype(np.uint8)


def qualitative_panel(
    patch: RasterPatch,
    truth: LabelMask,
    closed: LabelMask,
    prediction: OpenSetPrediction,
    palette: Palette,
    gap: int = 2,
) -> np.ndarray:
    """Input, ground truth, closed-set and open-set maps side by side."""
    images = [
        false_colour(patch),
        render_prediction(truth, palette),
        render_prediction(closed, palette),
        render_prediction(prediction, palette),
    ]
    spacer = np.full((images[0].shape[0], gap, 3), 255, np.uint8)
    parts: ty.List[np.ndarray] = []
    for image in images:
        if parts:
            parts.append(spacer)
        parts.append(image)
    return np.concatenate(parts, axis=1)


def encode_png(image: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8)).save(
        buffer, format="PNG"
    )
    return buffer.getvalue()


def save_png(path: ty.Union[str, pathlib.Path],
             image: np.ndarray) -> pathlib.Path:
    path = pathlib.Path(path)
    write_bytes(path, encode_png(image))
    return path
