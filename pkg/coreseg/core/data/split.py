import dataclasses
import math
import typing as ty

import numpy as np

from coreseg.errors import SplitError
from .patch import RasterPatch, Scene

T = ty.TypeVar("T")


def split_counts(n: int, fractions: ty.Sequence[float]) -> ty.List[int]:
    """Return how many scenes each split receives.

    Each split gets ``floor(fraction * n)`` scenes but at least one;
    leftover scenes go to the first (training) split. When the
    minimum of one scene leaves training empty, the largest other
    split gives scenes back.
    """
    if not fractions or any(f <= 0 for f in fractions):
        raise SplitError("fractions must be positive, got {}".format(
            list(fractions)))
    if not math.isclose(sum(fractions), 1.0, abs_tol=1e-6):
        raise SplitError("fractions sum to {}, not 1".format(sum(fractions)))
    if n < len(fractions):
        raise SplitError("{} scenes for {} splits".format(n, len(fractions)))
    counts = [max(1, math.floor(f * n + 1e-9)) for f in fractions]
    counts[0] += n - sum(counts)
    while counts[0] < 1:
        largest = max(range(1, len(counts)), key=lambda i: (counts[i], -i))
        counts[largest] -= 1
        counts[0] += 1
    return counts


def split_dataset(
    scenes: ty.Sequence[T],
    fractions: ty.Sequence[float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> ty.Tuple[ty.List[T], ...]:
    """Split scenes (never patches) into disjoint groups.

    Parameters
    ----------
    scenes : sequence
        Whole scenes; patches are extracted after splitting so no
        scene contributes to two splits.
    fractions : sequence of float
        Positive, summing to 1. Usually (train, validation, test).
    seed : int
        Seed of the shuffle that precedes splitting.

    Returns
    -------
    tuple of lists
        One list per fraction.

    Raises
    ------
    SplitError
        When fractions are invalid or there are fewer scenes than
        splits.
    """
    counts = split_counts(len(scenes), fractions)
    order = np.random.default_rng(seed).permutation(len(scenes))
    out = []
    start = 0
    for count in counts:
        out.append([scenes[i] for i in order[start:start + count]])
        start += count
    return tuple(out)


@dataclasses.dataclass(frozen=True)
class ChannelNormalizer:
    """Per-channel min-max scaling to [0, 1].

    Fitted on the training split only and then applied to every split.
    Constant channels are mapped to 0.
    """

    minimum: ty.Tuple[float, ...]
    maximum: ty.Tuple[float, ...]

    @classmethod
    def fit(cls, scenes: ty.Iterable[Scene]) -> "ChannelNormalizer":
        lows, highs = [], []
        for scene in scenes:
            flat = scene.patch.pixels.reshape(-1, scene.patch.shape[2])
            lows.append(flat.min(axis=0))
            highs.append(flat.max(axis=0))
        if not lows:
            raise SplitError("cannot fit normalization on zero scenes")
        return cls(
            tuple(float(v) for v in np.min(lows, axis=0)),
            tuple(float(v) for v in np.max(highs, axis=0)),
        )

    def apply(self, scene: Scene) -> Scene:
        low = np.asarray(self.minimum, np.float32)
        span = np.asarray(self.maximum, np.float32) - low
        span[span == 0] = 1.0
        pixels = np.clip((scene.patch.pixels - low) / span, 0.0, 1.0)
        return Scene(
            RasterPatch(pixels, scene.patch.channel_names, scene.patch.origin),
            scene.mask,
        )
