"""Generate synthetic textured scenes with known per-pixel classes."""

import dataclasses
import itertools
import typing as ty

import numpy as np

from coreseg.errors import SyntheticSpecError
from .patch import LabelMask, RasterPatch, Scene

PATTERNS = ("rows", "cols", "checker")


@dataclasses.dataclass(frozen=True)
class ClassTexture:
    """Texture of one class.

    Each pixel is ``base + noise * (0.5 * pattern + u)`` with ``pattern``
    a ±1 stripe or checker of the given ``period`` and ``u`` uniform in
    ``[-0.5, 0.5)``, clipped to ``[0, 1]``.
    """

    name: str
    base: ty.Tuple[float, ...]
    noise: float = 0.1
    period: int = 4
    pattern: str = "rows"

    def __post_init__(self) -> None:
        object.__setattr__(self, "base", tuple(float(b) for b in self.base))

    @property
    def key(self) -> ty.Tuple[ty.Any, ...]:
        return self.base, self.noise, self.period, self.pattern


@dataclasses.dataclass(frozen=True)
class SyntheticSceneSpec:
    """Geometry and textures of a synthetic scene.

    The image is split into ``len(grid)`` rows and ``len(grid[0])``
    columns of rectangular regions; ``grid[i][j]`` is the class id of
    region ``(i, j)``. Region edges sit at ``floor(i * size / n)``.
    """

    classes: ty.Tuple[ClassTexture, ...]
    grid: ty.Tuple[ty.Tuple[int, ...], ...]
    height: int
    width: int
    channels: int
    seed: int = 0
    channel_names: ty.Optional[ty.Tuple[str, ...]] = None
    scene_id: str = "synthetic"

    def validate(self) -> None:
        if not self.classes:
            raise SyntheticSpecError("zero classes")
        if self.height <= 0 or self.width <= 0 or self.channels <= 0:
            raise SyntheticSpecError(
                "zero-size image {}x{}x{}".format(
                    self.height, self.width, self.channels
                )
            )
        if not self.grid or not self.grid[0]:
            raise SyntheticSpecError("empty region grid")
        if any(len(row) != len(self.grid[0]) for row in self.grid):
            raise SyntheticSpecError("ragged region grid")
        if len(self.grid) > self.height or len(self.grid[0]) > self.width:
            raise SyntheticSpecError("more regions than pixels")
        for class_id in itertools.chain.from_iterable(self.grid):
            if not 0 <= class_id < len(self.classes):
                raise SyntheticSpecError(
                    "region class {} out of range".format(class_id)
                )
        for texture in self.classes:
            if len(texture.base) != self.channels:
                raise SyntheticSpecError(
                    "class {} has {} base values for {} channels".format(
                        texture.name, len(texture.base), self.channels
                    )
                )
            if min(texture.base) < 0 or max(texture.base) > 1:
                raise SyntheticSpecError(
                    "class {} base colour outside [0, 1]".format(texture.name)
                )
            if texture.noise < 0 or texture.period < 1:
                raise SyntheticSpecError(
                    "class {} has negative noise or period < 1".format(
                        texture.name
                    )
                )
            if texture.pattern not in PATTERNS:
                raise SyntheticSpecError(
                    "class {} pattern {!r} not in {}".format(
                        texture.name, texture.pattern, PATTERNS
                    )
                )
        for a, b in itertools.combinations(self.classes, 2):
            if a.key == b.key:
                raise SyntheticSpecError(
                    "classes {} and {} share a texture".format(a.name, b.name)
                )
            gap = np.max(np.abs(np.subtract(a.base, b.base)))
            if gap <= max(a.noise, b.noise):
                raise SyntheticSpecError(
                    "classes {} and {} differ by {:.3f}, not more than "
                    "their noise amplitude".format(a.name, b.name, gap)
                )
        if (self.channel_names is not None
                and len(self.channel_names) != self.channels):
            raise SyntheticSpecError("channel_names length mismatch")

    def region_edges(self) -> ty.Tuple[ty.List[int], ty.List[int]]:
        n_rows, n_cols = len(self.grid), len(self.grid[0])
        rows = [i * self.height // n_rows for i in range(n_rows + 1)]
        cols = [j * self.width // n_cols for j in range(n_cols + 1)]
        return rows, cols


def _pattern(texture: ClassTexture, rows: np.ndarray,
             cols: np.ndarray) -> np.ndarray:
    if texture.pattern == "rows":
        phase = rows // texture.period
    elif texture.pattern == "cols":
        phase = cols // texture.period
    else:
        phase = rows // texture.period + cols // texture.period
    return 1.0 - 2.0 * (phase % 2)


def generate_synthetic(spec: SyntheticSceneSpec) -> Scene:
    """Render a synthetic scene and its mask in original class ids.

    Output is a pure function of ``spec``: the same seed yields
    bit-identical arrays.

    Raises
    ------
    SyntheticSpecError
        When ``spec`` has no classes, a zero-size image or
        indistinguishable textures.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    jitter = rng.uniform(-0.5, 0.5, (spec.height, spec.width, spec.channels))
    rows, cols = np.meshgrid(
        np.arange(spec.height), np.arange(spec.width), indexing="ij"
    )
    pixels = np.empty((spec.height, spec.width, spec.channels), np.float64)
    labels = np.empty((spec.height, spec.width), np.int64)
    row_edges, col_edges = spec.region_edges()
    for i, j in itertools.product(range(len(spec.grid)),
                                  range(len(spec.grid[0]))):
        class_id = spec.grid[i][j]
        texture = spec.classes[class_id]
        window = (slice(row_edges[i], row_edges[i + 1]),
                  slice(col_edges[j], col_edges[j + 1]))
        labels[window] = class_id
        if texture.noise == 0:
            pixels[window] = texture.base
            continue
        pattern = _pattern(texture, rows[window], cols[window])[..., None]
        pixels[window] = np.asarray(texture.base) + texture.noise * (
            0.5 * pattern + jitter[window]
        )
    np.clip(pixels, 0.0, 1.0, out=pixels)
    names = spec.channel_names or tuple(
        "C{}".format(c) for c in range(spec.channels)
    )
    return Scene(
        RasterPatch(pixels.astype(np.float32), names, (spec.scene_id, 0, 0)),
        LabelMask(labels, len(spec.classes)),
    )


TOY_CLASSES = (
    ClassTexture("impervious", (0.80, 0.75, 0.70, 0.10), 0.10, 4, "rows"),
    ClassTexture("building", (0.30, 0.35, 0.70, 0.90), 0.10, 8, "checker"),
    ClassTexture("low_vegetation", (0.85, 0.30, 0.45, 0.15), 0.10, 2, "cols"),
    ClassTexture("tree", (0.55, 0.10, 0.20, 0.60), 0.10, 3, "checker"),
)
TOY_CHANNELS = ("IR", "R", "G", "nDSM")


def toy_scene_spec(
    seed: int,
    size: int = 128,
    grid: int = 4,
    noise: ty.Optional[float] = None,
    scene_id: ty.Optional[str] = None,
) -> SyntheticSceneSpec:
    """Return a 4-class, 4-channel scene spec with a shuffled layout.

    Every class occupies the same number of grid cells, so every class
    appears in every scene.
    """
    classes = TOY_CLASSES
    if noise is not None:
        classes = tuple(dataclasses.replace(c, noise=noise) for c in classes)
    cells = grid * grid
    if cells % len(classes):
        raise SyntheticSpecError(
            "{} grid cells cannot be shared by {} classes".format(
                cells, len(classes)
            )
        )
    layout = np.repeat(np.arange(len(classes)), cells // len(classes))
    layout = np.random.default_rng(seed).permutation(layout)
    return SyntheticSceneSpec(
        classes=classes,
        grid=tuple(
            tuple(int(v) for v in layout[r * grid:(r + 1) * grid])
            for r in range(grid)
        ),
        height=size,
        width=size,
        channels=len(TOY_CHANNELS),
        seed=seed,
        channel_names=TOY_CHANNELS,
        scene_id=scene_id or "toy{:04d}".format(seed),
    )
