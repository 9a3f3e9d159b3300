"""Run LOCO scenarios stage by stage with resumable artifacts.

A scenario directory ``<output>/<scenario>/`` holds::

    backbone.pt[.json]      closed-set network and its stage sidecar
    closed_log.csv
    cae.pt[.json]           conditional autoencoder
    cae_log.csv             per-epoch CAE losses and validation
    cae_steps.csv           per-step CAE losses
    scores/val.npz[.json]   sweep error volumes, closed labels, truth
    scores/test.npz[.json]
    calibration.json        selected and oracle quantiles
    report.json[.json]      EvalReport
    report.csv, roc.csv
    predictions/*.png       fused label maps (UNKNOWN = K)
    renders/*.png           ROC plot, qualitative panels, heatmaps
    renders.json            list of the renders above
"""

import dataclasses
import functools
import logging
import pathlib
import typing as ty

import numpy as np
import torch

from coreseg.config import ExperimentConfig, ScenarioConfig, config_hash
from coreseg.core.backbone import (ArchDescriptor, BackboneCheckpoint,
                                   argmax_labels, build_backbone,
                                   train_closed_set)
from coreseg.core.data import (ChannelNormalizer, LabelMask, LocoSpec,
                               PatchDataset, RasterPatch, Scene, apply_loco,
                               extract_patches, generate_synthetic,
                               list_scenes, load_scene, split_dataset,
                               stack_patches, toy_scene_spec)
from coreseg.core.evaluation import (EvalReport, RocCurve,
                                     evaluate_scenario, reports_to_csv,
                                     roc_to_csv, scenario_roc)
from coreseg.core.openset import (OpenSetPrediction, ScoreMap,
                                  ThresholdSpec, export_prediction, fuse,
                                  min_reduce, select_quantile, sweep_batch)
from coreseg.core.reconstruction import CAECheckpoint, train_cae
from coreseg.core.report import (Palette, plot_roc, qualitative_panel,
                                 render_error_heatmap, save_png)
from coreseg.errors import ConfigError, SplitError
from coreseg.tools import (atomic_path, default_workers, json, log_memory,
                           set_random_seeds, stage, write_text)
from .artifacts import StageArtifact

logger = logging.getLogger(__name__)

STAGES = ("data", "backbone", "cae", "scores", "calibrate", "report")
SPLITS = ("val", "test")

Origin = ty.Tuple[str, int, int]


@dataclasses.dataclass(frozen=True)
class PreparedData:
    """Scenes of one scenario with masks already in training ids.

    Pixels are raw; :meth:`patches` normalizes and tiles them.
    """

    loco: LocoSpec
    train: ty.Tuple[Scene, ...]
    val: ty.Tuple[Scene, ...]
    test: ty.Tuple[Scene, ...]
    normalizer: ChannelNormalizer

    @property
    def in_channels(self) -> int:
        return self.train[0].patch.shape[2]

    def patches(self, split: str, normalizer: ChannelNormalizer,
                patch_size: int, stride: int) -> ty.List[Scene]:
        out: ty.List[Scene] = []
        for scene in getattr(self, split):
            out.extend(
                extract_patches(normalizer.apply(scene), patch_size, stride)
            )
        return out


@dataclasses.dataclass(frozen=True, eq=False)
class SplitScores:
    """Sweep output of every patch of a split.

    Attributes
    ----------
    errors : np.ndarray
        N×H×W×K reconstruction errors.
    closed : np.ndarray
        N×H×W closed-set labels.
    truth : np.ndarray
        N×H×W training ids (UNKNOWN and IGNORE included).
    origins : tuple
        ``(scene_id, row, col)`` of every patch.
    """

    errors: np.ndarray
    closed: np.ndarray
    truth: np.ndarray
    origins: ty.Tuple[Origin, ...]

    @property
    def num_known(self) -> int:
        return self.errors.shape[-1]

    def score_maps(self) -> ty.List[ScoreMap]:
        return [min_reduce(volume) for volume in self.errors]

    def pooled(self) -> ty.Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flattened ``(min_error, is_unknown, is_ignored)``."""
        scores = self.errors.min(axis=-1).ravel()
        truth = self.truth.ravel()
        return scores, truth == self.num_known, truth < 0

    def truths(self) -> ty.List[LabelMask]:
        return [LabelMask(t, self.num_known) for t in self.truth]

    def predictions(self, spec: ThresholdSpec) -> ty.List[OpenSetPrediction]:
        return [
            fuse(LabelMask(closed, self.num_known), score, spec)
            for closed, score in zip(self.closed, self.score_maps())
        ]

    def save(self, path: ty.Union[str, pathlib.Path]) -> None:
        with atomic_path(path) as tmp, open(tmp, "wb") as f:
            np.savez(
                f, errors=self.errors, closed=self.closed, truth=self.truth,
                scene_ids=np.asarray([o[0] for o in self.origins]),
                offsets=np.asarray([o[1:] for o in self.origins],
                                   dtype=np.int64).reshape(-1, 2),
            )

    @classmethod
    def load(cls, path: ty.Union[str, pathlib.Path]) -> "SplitScores":
        with np.load(path, allow_pickle=False) as data:
            origins = tuple(
                (str(s), int(r), int(c))
                for s, (r, c) in zip(data["scene_ids"], data["offsets"])
            )
            return cls(data["errors"], data["closed"], data["truth"],
                       origins)


@dataclasses.dataclass(frozen=True)
class Calibration:
    """Validation-selected threshold and the test-sweep oracle."""

    spec: ThresholdSpec
    oracle: ThresholdSpec
    table: ty.Tuple[ty.Tuple[float, float], ...]
    oracle_table: ty.Tuple[ty.Tuple[float, float], ...]

    def balanced_accuracy(self, q: float, oracle: bool = False) -> float:
        table = self.oracle_table if oracle else self.table
        return dict(table)[q]


@torch.no_grad()
def sweep_split(
    backbone: BackboneCheckpoint,
    cae: CAECheckpoint,
    patches: ty.Sequence[Scene],
    batch: int,
    workers: int = 1,
) -> SplitScores:
    """Closed-set labels and the class sweep of every patch.

    Raises
    ------
    ArtifactChainError
        When ``cae`` was not trained on ``backbone``.
    """
    cae.check_backbone(backbone)
    num_known = backbone.arch.num_classes
    errors, closed, truth = [], [], []
    for start in range(0, len(patches), batch):
        x, y = stack_patches(patches[start:start + batch])
        backbone.arch.check_input(x)
        logits, _ = backbone.model(x)
        closed.append(argmax_labels(logits).numpy())
        volume = sweep_batch(backbone.model, cae.model, x, num_known, workers)
        errors.append(volume.permute(0, 2, 3, 1).contiguous().numpy())
        truth.append(y.numpy())
    return SplitScores(
        np.concatenate(errors), np.concatenate(closed),
        np.concatenate(truth), tuple(p.patch.origin for p in patches)
    )


def _normalizer_meta(normalizer: ChannelNormalizer) -> ty.Dict[str, ty.Any]:
    return {"minimum": list(normalizer.minimum),
            "maximum": list(normalizer.maximum)}


def _select_channels(scene: Scene, names: ty.Sequence[str]) -> Scene:
    available = [n.lower() for n in scene.patch.channel_names]
    missing = [n for n in names if n.lower() not in available]
    if missing:
        raise ConfigError(
            None, "dataset", "channels",
            "scene {} has no channels {}".format(scene.patch.origin[0],
                                                 missing)
        )
    index = [available.index(n.lower()) for n in names]
    patch = scene.patch
    return Scene(
        RasterPatch(patch.pixels[..., index],
                    tuple(patch.channel_names[i] for i in index),
                    patch.origin),
        scene.mask,
    )


class Pipeline:
    """Stages of the LOCO experiment for one configuration.

    Parameters
    ----------
    config : ExperimentConfig
    resume : bool, optional
        Reuse stage artifacts whose sidecar matches the current
        settings and upstream fingerprints.
    force : iterable of str, optional
        Stages rerun even when ``resume`` is set.
    workers : int, optional
        Threads of the class sweep; defaults to ``[openset] workers``
        or the physical core count.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        resume: bool = True,
        force: ty.Iterable[str] = (),
        workers: ty.Optional[int] = None,
    ) -> None:
        self.config = config
        self.resume = resume
        self.force = frozenset(force)
        self.workers = workers or config.openset.workers or default_workers()
        self.curves: ty.Dict[str, RocCurve] = {}

    def scenario_dir(self, scenario: ScenarioConfig) -> pathlib.Path:
        return self.config.output_dir / scenario.name

    @functools.cached_property
    def scenes(self) -> ty.Tuple[ty.List[Scene], ...]:
        """Train, validation and test scenes in original class ids."""
        dataset = self.config.dataset
        if dataset.kind == "synthetic":
            scenes = [
                generate_synthetic(
                    toy_scene_spec(
                        self.config.seed * 100003 + i,
                        size=dataset.synthetic_size,
                        grid=dataset.synthetic_grid,
                        noise=dataset.synthetic_noise,
                        scene_id="toy{:04d}".format(i),
                    )
                ) for i in range(dataset.synthetic_scenes)
            ]
        else:
            scenes = [self._load(scene_id)
                      for scene_id in list_scenes(dataset.root)]
        if dataset.channels:
            scenes = [_select_channels(s, dataset.channels) for s in scenes]
        logger.info("Loaded %d %s scenes", len(scenes), dataset.kind)
        if not (dataset.val_scenes or dataset.test_scenes):
            return split_dataset(scenes, dataset.fractions, self.config.seed)
        by_id = {s.patch.origin[0]: s for s in scenes}
        missing = [i for i in dataset.val_scenes + dataset.test_scenes
                   if i not in by_id]
        if missing:
            raise SplitError("scenes {} not found".format(missing))
        pinned = set(dataset.val_scenes) | set(dataset.test_scenes)
        train = [s for s in scenes if s.patch.origin[0] not in pinned]
        val = [by_id[i] for i in dataset.val_scenes]
        test = [by_id[i] for i in dataset.test_scenes]
        if not train or not val or not test:
            raise SplitError("train, validation and test need a scene each")
        return train, val, test

    def _load(self, scene_id: str) -> Scene:
        scene, class_names = load_scene(self.config.dataset.root, scene_id)
        expected = [c.lower() for c in self.config.dataset.classes]
        if [c.lower() for c in class_names] != expected:
            raise ConfigError(
                None, "dataset", "classes",
                "scene {} has classes {}".format(scene_id, class_names)
            )
        return scene

    def keys(self, scenario: ScenarioConfig) -> ty.Dict[str, str]:
        """Settings hash of every cached stage, upstream included."""
        config = self.config
        keys = {}
        keys["data"] = config_hash({
            "dataset": config.dataset,
            "seed": config.seed,
            "held_out": scenario.held_out,
        })
        keys["backbone"] = config_hash({
            "data": keys["data"],
            "architecture": config.architecture,
            "closed": config.closed,
        })
        keys["cae"] = config_hash({"backbone": keys["backbone"],
                                   "cae": config.cae})
        keys["scores"] = config_hash({"cae": keys["cae"]})
        keys["report"] = config_hash({
            "scores": keys["scores"],
            "openset": config.openset.quantiles,
            "report": config.report,
        })
        return keys

    def _reusable(self, kind: str, path: pathlib.Path, key: str,
                  upstream: ty.Mapping[str, str]) -> bool:
        if not self.resume or kind in self.force:
            return False
        artifact = StageArtifact.read(path)
        if artifact is None:
            return False
        if artifact.is_current(key, upstream):
            logger.info("Reusing %s artifact %s", kind, path)
            return True
        return False

    def _patches(self, data: PreparedData, split: str,
                 normalizer: ChannelNormalizer) -> ty.List[Scene]:
        dataset = self.config.dataset
        stride = dataset.stride if split == "train" else dataset.patch_size
        return data.patches(split, normalizer, dataset.patch_size, stride)

    @staticmethod
    def _backbone_normalizer(backbone: BackboneCheckpoint
                             ) -> ChannelNormalizer:
        meta = backbone.metadata["normalizer"]
        return ChannelNormalizer(tuple(meta["minimum"]),
                                 tuple(meta["maximum"]))

    @stage("data")
    def prepare(self, scenario: ScenarioConfig) -> PreparedData:
        loco = LocoSpec.from_names(self.config.dataset.classes,
                                   scenario.held_out)
        splits = []
        for scenes in self.scenes:
            splits.append(tuple(
                Scene(s.patch, apply_loco(s.mask, loco)) for s in scenes
            ))
        train, val, test = splits
        logger.info(
            "Scenario %s: held out %s, %d known classes, %d/%d/%d scenes",
            scenario.name, ", ".join(loco.held_out_names), loco.num_known,
            len(train), len(val), len(test)
        )
        return PreparedData(loco, train, val, test,
                            ChannelNormalizer.fit(train))

    @stage("backbone")
    def backbone(self, scenario: ScenarioConfig,
                 data: PreparedData) -> BackboneCheckpoint:
        directory = self.scenario_dir(scenario)
        path = directory / "backbone.pt"
        key = self.keys(scenario)["backbone"]
        if self._reusable("backbone", path, key, {}):
            return BackboneCheckpoint.load(path)
        arch = ArchDescriptor(
            self.config.architecture.blocks,
            self.config.architecture.base_width,
            data.loco.num_known,
            data.in_channels,
        )
        set_random_seeds(self.config.closed.seed)
        train = PatchDataset(
            self._patches(data, "train", data.normalizer),
            flips=self.config.dataset.flips, seed=self.config.closed.seed
        )
        val = PatchDataset(self._patches(data, "val", data.normalizer))
        log_path = directory / "closed_log.csv"
        log_path.unlink(missing_ok=True)
        checkpoint = train_closed_set(
            build_backbone(arch, self.config.closed.seed), train, val,
            self.config.closed, log_path, {
                "scenario": scenario.name,
                "known_classes": list(data.loco.known_names),
                "held_out": list(data.loco.held_out_names),
                "normalizer": _normalizer_meta(data.normalizer),
            }
        )
        checkpoint.save(path)
        StageArtifact("backbone", str(path), key, {},
                      checkpoint.fingerprint).write()
        return checkpoint

    @stage("cae")
    def cae(self, scenario: ScenarioConfig, data: PreparedData,
            backbone: BackboneCheckpoint) -> CAECheckpoint:
        directory = self.scenario_dir(scenario)
        path = directory / "cae.pt"
        key = self.keys(scenario)["cae"]
        upstream = {"backbone": backbone.fingerprint}
        if self._reusable("cae", path, key, upstream):
            return CAECheckpoint.load(path, backbone)
        normalizer = self._backbone_normalizer(backbone)
        set_random_seeds(self.config.cae.seed)
        train = PatchDataset(
            self._patches(data, "train", normalizer),
            flips=self.config.dataset.flips, seed=self.config.cae.seed
        )
        val = PatchDataset(self._patches(data, "val", normalizer))
        log_path = directory / "cae_log.csv"
        step_log_path = directory / "cae_steps.csv"
        for stale in (log_path, step_log_path):
            stale.unlink(missing_ok=True)
        checkpoint = train_cae(backbone, train, val, self.config.cae,
                               log_path, workers=self.workers,
                               step_log_path=step_log_path)
        checkpoint.save(path)
        StageArtifact("cae", str(path), key, upstream,
                      checkpoint.fingerprint).write()
        return checkpoint

    @stage("scores")
    def scores(self, scenario: ScenarioConfig, data: PreparedData,
               backbone: BackboneCheckpoint,
               cae: CAECheckpoint) -> ty.Dict[str, SplitScores]:
        key = self.keys(scenario)["scores"]
        upstream = {"backbone": backbone.fingerprint,
                    "cae": cae.fingerprint}
        normalizer = self._backbone_normalizer(backbone)
        out = {}
        for split in SPLITS:
            path = self.scenario_dir(scenario) / "scores" / "{}.npz".format(
                split)
            if self._reusable("scores", path, key, upstream):
                out[split] = SplitScores.load(path)
                continue
            scores = sweep_split(
                backbone, cae, self._patches(data, split, normalizer),
                self.config.cae.batch, self.workers
            )
            scores.save(path)
            StageArtifact("scores", str(path), key, upstream).write()
            out[split] = scores
        return out

    @stage("calibrate")
    def calibrate(self, scenario: ScenarioConfig,
                  scores: ty.Mapping[str, SplitScores]) -> Calibration:
        grid = self.config.openset.quantiles
        values, unknown, ignored = scores["val"].pooled()
        spec, table = select_quantile(values, unknown, grid, ignored,
                                      "validation")
        values, unknown, ignored = scores["test"].pooled()
        oracle, oracle_table = select_quantile(values, unknown, grid, ignored,
                                               "test-sweep")
        calibration = Calibration(spec, oracle, tuple(table),
                                  tuple(oracle_table))
        write_text(self.scenario_dir(scenario) / "calibration.json",
                   json.dumps(calibration))
        return calibration

    @stage("report")
    def report(
        self,
        scenario: ScenarioConfig,
        data: PreparedData,
        backbone: BackboneCheckpoint,
        scores: ty.Mapping[str, SplitScores],
        calibration: Calibration,
    ) -> EvalReport:
        directory = self.scenario_dir(scenario)
        test = scores["test"]
        predictions = test.predictions(calibration.spec)
        truths = test.truths()
        report = evaluate_scenario(predictions, truths, data.loco,
                                   scenario.name)
        report = dataclasses.replace(
            report,
            oracle_q=calibration.oracle.q,
            oracle_balanced_accuracy=calibration.balanced_accuracy(
                calibration.oracle.q, oracle=True),
        )
        path = directory / "report.json"
        write_text(path, json.dumps(report))
        write_text(directory / "report.csv", reports_to_csv([report]))
        class_names = data.loco.known_names
        for prediction, origin in zip(predictions, test.origins):
            export_prediction(
                directory / "predictions" / "{}_{}_{}".format(*origin),
                prediction, class_names
            )
        renders = self._render(scenario, data, backbone, test, predictions)
        StageArtifact("report", str(path), self.keys(scenario)["report"],
                      {"backbone": backbone.fingerprint}).write()
        logger.info(
            "Scenario %s: AUROC %s, closed accuracy %.4f, q %.2f, "
            "%d renders", scenario.name,
            "undefined" if report.auroc_unknown is None else
            "{:.4f}".format(report.auroc_unknown), report.closed_accuracy,
            report.q, len(renders)
        )
        return report

    def _render(
        self,
        scenario: ScenarioConfig,
        data: PreparedData,
        backbone: BackboneCheckpoint,
        test: SplitScores,
        predictions: ty.Sequence[OpenSetPrediction],
    ) -> ty.List[pathlib.Path]:
        directory = self.scenario_dir(scenario)
        renders = []
        curve = scenario_roc(predictions, test.truths())
        if curve is not None:
            self.curves[scenario.name] = curve
            write_text(directory / "roc.csv", roc_to_csv(curve))
            renders.append(plot_roc(directory / "renders" / "roc.png",
                                    {scenario.name: curve}, scenario.name))
        palette = Palette.default(data.loco.known_names)
        patches = self._patches(data, "test",
                                self._backbone_normalizer(backbone))
        policy = self.config.report
        for i in range(min(policy.panels, len(predictions))):
            prediction = predictions[i]
            panel = qualitative_panel(
                patches[i].patch, patches[i].mask, prediction.closed_labels,
                prediction, palette
            )
            renders.append(save_png(
                directory / "renders" / "panel_{}.png".format(i), panel))
            heatmap = render_error_heatmap(prediction.score_map,
                                           policy.heatmap_policy,
                                           policy.heatmap_range)
            renders.append(save_png(
                directory / "renders" / "heatmap_{}.png".format(i), heatmap))
        write_text(directory / "renders.json",
                   json.dumps([p.relative_to(directory) for p in renders]))
        return renders

    def renders(self, scenario: ScenarioConfig) -> ty.List[pathlib.Path]:
        """Renders listed by the last report stage of ``scenario``."""
        directory = self.scenario_dir(scenario)
        manifest = directory / "renders.json"
        if not manifest.is_file():
            return [manifest]
        return [directory / p
                for p in json.loads(manifest.read_text(encoding="utf8"))]

    def run(self, scenario: ScenarioConfig, until: str = "report") -> ty.Any:
        """Run stages in order up to ``until`` and return its output."""
        if until not in STAGES:
            raise ValueError("until must be one of {}".format(STAGES))
        data = self.prepare(scenario)
        log_memory("data")
        if until == "data":
            return data
        backbone = self.backbone(scenario, data)
        log_memory("backbone")
        if until == "backbone":
            return backbone
        cae = self.cae(scenario, data, backbone)
        log_memory("cae")
        if until == "cae":
            return cae
        scores = self.scores(scenario, data, backbone, cae)
        log_memory("scores")
        if until == "scores":
            return scores
        calibration = self.calibrate(scenario, scores)
        if until == "calibrate":
            return calibration
        report = self.report(scenario, data, backbone, scores, calibration)
        log_memory("report")
        return report
