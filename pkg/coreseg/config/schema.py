"""Experiment configuration schema.

An experiment file has the sections ``[experiment]``, ``[dataset]``,
``[scenarios]``, ``[architecture]``, ``[closed]``, ``[cae]``,
``[openset]`` and ``[report]``. Every section but ``[dataset]`` may be
omitted, in which case defaults apply; ``[scenarios]`` then defaults
to one LOCO scenario per class.
"""

import dataclasses
import hashlib
import pathlib
import typing as ty

from coreseg.core.backbone import ClosedSetHyper
from coreseg.core.data import TOY_CLASSES
from coreseg.core.openset import quantile_grid
from coreseg.core.reconstruction import NONMATCH_MODES, CAEHyper
from coreseg.errors import BatchTooSmallError, ConfigError
from coreseg.tools import json
from .config import Config

DATASET_KINDS = ("synthetic", "disk")
HEATMAP_POLICIES = ("minmax", "fixed")
SECTIONS = ("experiment", "dataset", "scenarios", "architecture", "closed",
            "cae", "openset", "report")
# Recognised options per section; [scenarios] takes any scenario name.
OPTIONS: ty.Dict[str, ty.Tuple[str, ...]] = {
    "experiment": ("name", "seed", "output"),
    "dataset": ("kind", "classes", "patch_size", "stride", "fractions",
                "flips", "root", "channels", "val_scenes", "test_scenes",
                "synthetic_scenes", "synthetic_size", "synthetic_grid",
                "synthetic_noise"),
    "architecture": ("blocks", "base_width"),
    "closed": ("lr", "epochs", "batch", "weight_decay"),
    "cae": ("alpha", "lr", "epochs", "batch", "nonmatch_mode", "margin",
            "film_init_scale"),
    "openset": ("quantiles", "workers"),
    "report": ("heatmap_policy", "heatmap_range", "panels"),
}


@dataclasses.dataclass(frozen=True)
class DatasetConfig:
    """Where scenes come from and how they are tiled.

    ``kind="synthetic"`` renders ``synthetic_scenes`` toy scenes;
    ``kind="disk"`` reads the scene format under ``root``. Explicit
    ``val_scenes``/``test_scenes`` pin those splits; the remaining
    scenes are then training scenes. Otherwise scenes are split by
    ``fractions``.
    """

    kind: str = "synthetic"
    classes: ty.Tuple[str, ...] = tuple(c.name for c in TOY_CLASSES)
    patch_size: int = 64
    stride: int = 64
    fractions: ty.Tuple[float, float, float] = (0.6, 0.2, 0.2)
    flips: bool = False
    root: str = ""
    channels: ty.Tuple[str, ...] = ()
    val_scenes: ty.Tuple[str, ...] = ()
    test_scenes: ty.Tuple[str, ...] = ()
    synthetic_scenes: int = 10
    synthetic_size: int = 128
    synthetic_grid: int = 4
    synthetic_noise: float = 0.1


@dataclasses.dataclass(frozen=True)
class ScenarioConfig:
    name: str
    held_out: ty.Tuple[str, ...]


@dataclasses.dataclass(frozen=True)
class ArchitectureConfig:
    blocks: int = 4
    base_width: int = 32


@dataclasses.dataclass(frozen=True)
class OpensetConfig:
    """``workers=0`` sizes the sweep pool to the physical core count."""

    quantiles: ty.Tuple[float, ...] = quantile_grid()
    workers: int = 0


@dataclasses.dataclass(frozen=True)
class ReportConfig:
    heatmap_policy: str = "minmax"
    heatmap_range: ty.Tuple[float, float] = (0.0, 1.0)
    panels: int = 2


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    name: str
    output: str
    seed: int
    dataset: DatasetConfig
    scenarios: ty.Tuple[ScenarioConfig, ...]
    architecture: ArchitectureConfig
    closed: ClosedSetHyper
    cae: CAEHyper
    openset: OpensetConfig
    report: ReportConfig

    def scenario(self, name: str) -> ScenarioConfig:
        for scenario in self.scenarios:
            if scenario.name.lower() == name.lower():
                return scenario
        raise ConfigError(None, "scenarios", name, "no such scenario")

    @property
    def output_dir(self) -> pathlib.Path:
        return pathlib.Path(self.output)


def config_hash(obj: ty.Any) -> str:
    """SHA-256 of the canonical JSON of a dataclass tree."""
    return hashlib.sha256(
        json.dumps(obj, canonical=True).encode("utf8")
    ).hexdigest()


def _names(raw: str) -> ty.Tuple[str, ...]:
    names = tuple(n.strip() for n in raw.split(",") if n.strip())
    if not names:
        raise ValueError("empty list")
    return names


def _optional_names(raw: str) -> ty.Tuple[str, ...]:
    return tuple(n.strip() for n in raw.split(",") if n.strip())


def _floats(raw: str) -> ty.Tuple[float, ...]:
    return tuple(float(v) for v in _names(raw))


def _boolean(raw: str) -> bool:
    value = Config.BOOLEAN_STATES.get(raw.lower())
    if value is None:
        raise ValueError("not a boolean")
    return value


def _positive(cast: ty.Callable[[str], ty.Any]) -> ty.Callable[[str], ty.Any]:

    def parse(raw: str) -> ty.Any:
        value = cast(raw)
        if value <= 0:
            raise ValueError("must be positive")
        return value

    return parse


def _choice(choices: ty.Sequence[str]) -> ty.Callable[[str], str]:

    def parse(raw: str) -> str:
        if raw not in choices:
            raise ValueError("expected one of {}".format(", ".join(choices)))
        return raw

    return parse


def _dataset(config: Config) -> DatasetConfig:
    default = DatasetConfig()
    get = config.option
    kind = get("dataset", "kind", _choice(DATASET_KINDS))
    classes = get("dataset", "classes", _names, default.classes)
    if len(set(c.lower() for c in classes)) != len(classes):
        raise ConfigError(config.ini_file, "dataset", "classes",
                          "duplicate class names {}".format(list(classes)))
    if kind == "synthetic" and classes != default.classes:
        raise ConfigError(
            config.ini_file, "dataset", "classes",
            "synthetic scenes have classes {}".format(list(default.classes))
        )
    fractions = get("dataset", "fractions", _floats, default.fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(
            sum(fractions) - 1) > 1e-6:
        raise ConfigError(
            config.ini_file, "dataset", "fractions",
            "need 3 positive fractions summing to 1, got {}".format(
                list(fractions))
        )
    patch_size = get("dataset", "patch_size", _positive(int),
                     default.patch_size)
    dataset = DatasetConfig(
        kind=kind,
        classes=classes,
        patch_size=patch_size,
        stride=get("dataset", "stride", _positive(int), patch_size),
        fractions=ty.cast(ty.Tuple[float, float, float], fractions),
        flips=get("dataset", "flips", _boolean, default.flips),
        root=get("dataset", "root", str, default.root),
        channels=get("dataset", "channels", _optional_names, ()),
        val_scenes=get("dataset", "val_scenes", _optional_names, ()),
        test_scenes=get("dataset", "test_scenes", _optional_names, ()),
        synthetic_scenes=get("dataset", "synthetic_scenes", _positive(int),
                             default.synthetic_scenes),
        synthetic_size=get("dataset", "synthetic_size", _positive(int),
                           default.synthetic_size),
        synthetic_grid=get("dataset", "synthetic_grid", _positive(int),
                           default.synthetic_grid),
        synthetic_noise=get("dataset", "synthetic_noise", float,
                            default.synthetic_noise),
    )
    if kind == "disk" and not dataset.root:
        raise ConfigError(config.ini_file, "dataset", "root",
                          "required when kind = disk")
    if kind == "synthetic" and dataset.patch_size > dataset.synthetic_size:
        raise ConfigError(
            config.ini_file, "dataset", "patch_size",
            "{} exceeds synthetic_size {}".format(dataset.patch_size,
                                                  dataset.synthetic_size)
        )
    overlap = set(dataset.val_scenes) & set(dataset.test_scenes)
    if overlap:
        raise ConfigError(
            config.ini_file, "dataset", "test_scenes",
            "scenes {} also listed in val_scenes".format(sorted(overlap))
        )
    return dataset


def _scenarios(config: Config,
               classes: ty.Sequence[str]) -> ty.Tuple[ScenarioConfig, ...]:
    items = config.section_items("scenarios")
    if not items:
        items = [(name, name) for name in classes]
    lookup = {c.lower(): c for c in classes}
    scenarios = []
    for name, raw in items:
        try:
            held = _names(raw)
        except ValueError:
            raise ConfigError(config.ini_file, "scenarios", name,
                              "no held-out class") from None
        unknown = [h for h in held if h.lower() not in lookup]
        if unknown:
            raise ConfigError(
                config.ini_file, "scenarios", name,
                "classes {} are not in [dataset] classes".format(unknown)
            )
        held = tuple(lookup[h.lower()] for h in held)
        if len(classes) - len(set(held)) < 2:
            raise ConfigError(config.ini_file, "scenarios", name,
                              "fewer than 2 known classes remain")
        scenarios.append(ScenarioConfig(name, held))
    return tuple(scenarios)


def _closed(config: Config, seed: int) -> ClosedSetHyper:
    default = ClosedSetHyper()
    get = config.option
    return ClosedSetHyper(
        lr=get("closed", "lr", float, default.lr),
        epochs=get("closed", "epochs", _positive(int), default.epochs),
        batch=get("closed", "batch", _positive(int), default.batch),
        seed=seed,
        weight_decay=get("closed", "weight_decay", float,
                         default.weight_decay),
    )


def _cae(config: Config, seed: int) -> CAEHyper:
    default = CAEHyper()
    get = config.option
    try:
        return CAEHyper(
            alpha=get("cae", "alpha", float, default.alpha),
            lr=get("cae", "lr", float, default.lr),
            epochs=get("cae", "epochs", _positive(int), default.epochs),
            batch=get("cae", "batch", int, default.batch),
            seed=seed,
            nonmatch_mode=get("cae", "nonmatch_mode",
                              _choice(NONMATCH_MODES),
                              default.nonmatch_mode),
            margin=get("cae", "margin", float, default.margin),
            film_init_scale=get("cae", "film_init_scale", float,
                                default.film_init_scale),
        )
    except BatchTooSmallError as e:
        raise ConfigError(config.ini_file, "cae", "batch", str(e)) from None


def _openset(config: Config) -> OpensetConfig:
    quantiles = config.option("openset", "quantiles", _floats,
                              OpensetConfig.quantiles)
    if any(not 0 <= q <= 1 for q in quantiles):
        raise ConfigError(config.ini_file, "openset", "quantiles",
                          "quantiles must lie in [0, 1]")
    workers = config.option("openset", "workers", int, 0)
    if workers < 0:
        raise ConfigError(config.ini_file, "openset", "workers",
                          "must not be negative")
    return OpensetConfig(tuple(sorted(set(quantiles))), workers)


def _report(config: Config) -> ReportConfig:
    default = ReportConfig()
    value_range = config.option("report", "heatmap_range", _floats,
                                default.heatmap_range)
    if len(value_range) != 2 or value_range[0] >= value_range[1]:
        raise ConfigError(config.ini_file, "report", "heatmap_range",
                          "need low, high with low < high")
    return ReportConfig(
        heatmap_policy=config.option("report", "heatmap_policy",
                                     _choice(HEATMAP_POLICIES),
                                     default.heatmap_policy),
        heatmap_range=ty.cast(ty.Tuple[float, float], value_range),
        panels=config.option("report", "panels", int, default.panels),
    )


def _check_layout(config: Config) -> None:
    for section in config.sections():
        if section.lower() not in SECTIONS:
            raise ConfigError(config.ini_file, section, None,
                              "unknown section")
        known = OPTIONS.get(section.lower())
        if known is None:
            continue
        for option, _ in config.section_items(section):
            if option.lower() not in known:
                raise ConfigError(
                    config.ini_file, section, option,
                    "unknown option (expected one of {})".format(
                        ", ".join(known))
                )


def load_config(
    path: ty.Union[str, pathlib.Path],
    seed: ty.Optional[int] = None,
    output: ty.Optional[str] = None,
) -> ExperimentConfig:
    """Read and validate an experiment file.

    Parameters
    ----------
    path : str or Path
    seed : int, optional
        Overrides ``[experiment] seed``.
    output : str, optional
        Overrides ``[experiment] output``.

    Raises
    ------
    ConfigError
        On an unknown section or option, a missing mandatory option or
        an invalid value; the error names the file, section and option.
    """
    config = Config(path)
    _check_layout(config)
    name = config.option("experiment", "name", str,
                         pathlib.Path(path).stem)
    if seed is None:
        seed = config.option("experiment", "seed", int, 0)
    if output is None:
        output = config.option("experiment", "output", str,
                               str(pathlib.Path("runs") / name))
    dataset = _dataset(config)
    architecture = ArchitectureConfig(
        blocks=config.option("architecture", "blocks", _positive(int), 4),
        base_width=config.option("architecture", "base_width",
                                 _positive(int), 32),
    )
    if architecture.blocks < 2:
        raise ConfigError(config.ini_file, "architecture", "blocks",
                          "need at least 2 blocks, got {}".format(
                              architecture.blocks))
    divisor = 2**(architecture.blocks - 1)
    if dataset.patch_size % divisor:
        raise ConfigError(
            config.ini_file, "dataset", "patch_size",
            "{} is not divisible by {} ({} blocks)".format(
                dataset.patch_size, divisor, architecture.blocks)
        )
    return ExperimentConfig(
        name=name,
        output=output,
        seed=seed,
        dataset=dataset,
        scenarios=_scenarios(config, dataset.classes),
        architecture=architecture,
        closed=_closed(config, seed),
        cae=_cae(config, seed),
        openset=_openset(config),
        report=_report(config),
    )
