import dataclasses
import typing as ty
import warnings

import numpy as np
from matplotlib import colormaps

from coreseg.core.data import IGNORE
from coreseg.errors import PaletteError, PaletteFallbackWarning

RGB = ty.Tuple[int, int, int]

UNKNOWN_RGB: RGB = (255, 0, 0)
IGNORE_RGB: RGB = (0, 0, 0)

# ISPRS benchmark convention, keyed by lower-case class name.
DEFAULT_COLOURS: ty.Dict[str, RGB] = {
    "impervious": (255, 255, 255),
    "impervious_surfaces": (255, 255, 255),
    "building": (0, 0, 255),
    "low_vegetation": (0, 255, 255),
    "tree": (0, 255, 0),
    "high_vegetation": (0, 255, 0),
    "car": (255, 255, 0),
    "clutter": (255, 0, 255),
}


@dataclasses.dataclass(frozen=True)
class Palette:
    """Colour of every training id plus UNKNOWN (``K``) and IGNORE (-1).

    Attributes
    ----------
    colours : tuple of RGB
        ``colours[k]`` for known class ``k``.
    unknown, ignore : RGB
    names : tuple of str
        Class names, for legends.
    """

    colours: ty.Tuple[RGB, ...]
    unknown: RGB = UNKNOWN_RGB
    ignore: RGB = IGNORE_RGB
    names: ty.Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        entries = list(self.colours) + [self.unknown, self.ignore]
        if len(set(entries)) != len(entries):
            raise ValueError(
                "Palette colours must be distinct, got {}".format(entries)
            )

    @property
    def num_known(self) -> int:
        return len(self.colours)

    @classmethod
    def default(cls, class_names: ty.Sequence[str]) -> "Palette":
        """ISPRS colours for known names, a qualitative ramp for the rest.

        Fallback colours skip any colour already taken, and each use of
        one emits a :class:`PaletteFallbackWarning`.
        """
        taken = {UNKNOWN_RGB, IGNORE_RGB}
        colours: ty.List[ty.Optional[RGB]] = []
        for name in class_names:
            rgb = DEFAULT_COLOURS.get(name.lower())
            if rgb is not None and rgb not in taken:
                taken.add(rgb)
            else:
                rgb = None
            colours.append(rgb)
        fallback = (
            tuple(int(round(255 * c)) for c in colour[:3])
            for colour in colormaps["tab20"].colors
        )
        for i, name in enumerate(class_names):
            if colours[i] is not None:
                continue
            rgb = next(c for c in fallback if c not in taken)
            taken.add(ty.cast(RGB, rgb))
            colours[i] = ty.cast(RGB, rgb)
            warnings.warn(PaletteFallbackWarning(name, colours[i]))
        return cls(tuple(ty.cast(ty.List[RGB], colours)),
                   names=tuple(class_names))

    def lut(self) -> np.ndarray:
        """``(K + 2) × 3`` uint8 table; row ``K + 1`` is IGNORE."""
        return np.asarray(
            list(self.colours) + [self.unknown, self.ignore], dtype=np.uint8
        )

    def check(self, labels: np.ndarray) -> None:
        present = np.unique(labels)
        missing = [
            int(v) for v in present
            if v != IGNORE and not 0 <= v <= self.num_known
        ]
        if missing:
            raise PaletteError(missing)

    def inverse(self) -> ty.Dict[RGB, int]:
        table = {rgb: k for k, rgb in enumerate(self.colours)}
        table[self.unknown] = self.num_known
        table[self.ignore] = IGNORE
        return table
