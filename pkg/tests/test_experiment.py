import dataclasses
import json
import pathlib

import numpy as np
import pytest
import torch

import coreseg
from coreseg.core.backbone import BackboneCheckpoint, UNet
from coreseg.core.experiment import (STAGES, Pipeline, StageArtifact,
                                     run_loco_suite, run_scenario)
from coreseg.errors import ArtifactChainError, StageError

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"


def stamp(path: pathlib.Path):
    info = path.stat()
    return info.st_ino, info.st_mtime_ns


def swap_backbone(path: pathlib.Path) -> None:
    """Overwrite a saved backbone with a differently initialised one."""
    original = BackboneCheckpoint.load(path)
    torch.manual_seed(12345)
    other = BackboneCheckpoint.from_model(UNet(original.arch),
                                          original.metadata)
    assert other.fingerprint != original.fingerprint
    other.save(path)


@pytest.fixture
def building(tiny_config):
    return tiny_config.scenario("building")


def test_stage_order():
    assert STAGES == ("data", "backbone", "cae", "scores", "calibrate",
                      "report")


def test_run_writes_artifacts(tiny_config, building):
    pipeline = Pipeline(tiny_config, workers=1)
    report = pipeline.run(building)
    directory = pipeline.scenario_dir(building)
    for name in ("backbone.pt", "backbone.pt.json", "closed_log.csv",
                 "cae.pt", "cae.pt.json", "cae_log.csv", "cae_steps.csv",
                 "scores/val.npz", "scores/test.npz", "calibration.json",
                 "report.json", "report.json.json", "report.csv",
                 "renders.json"):
        assert (directory / name).is_file(), name
    assert list((directory / "predictions").glob("*.png"))
    assert all(p.is_file() for p in pipeline.renders(building))
    assert report.scenario == "building"
    assert report.held_out == ("building", )
    assert report.q in tiny_config.openset.quantiles
    assert report.oracle_q in tiny_config.openset.quantiles
    calibration = json.loads(
        (directory / "calibration.json").read_text(encoding="utf8"))
    assert "validation" in json.dumps(calibration)
    assert "test-sweep" in json.dumps(calibration)


def test_run_until_returns_stage_output(tiny_config, building):
    pipeline = Pipeline(tiny_config, workers=1)
    data = pipeline.run(building, "data")
    assert data.loco.num_known == 3
    assert data.train and data.val and data.test
    backbone = pipeline.run(building, "backbone")
    assert backbone.arch.num_classes == 3
    assert "normalizer" in backbone.metadata
    with pytest.raises(ValueError):
        pipeline.run(building, "deploy")


def test_resume_reuses_both_training_stages(tiny_config, building):
    Pipeline(tiny_config, workers=1).run(building, "cae")
    directory = tiny_config.output_dir / "building"
    before = stamp(directory / "backbone.pt"), stamp(directory / "cae.pt")
    cae = Pipeline(tiny_config, workers=1).run(building, "cae")
    after = stamp(directory / "backbone.pt"), stamp(directory / "cae.pt")
    assert before == after
    sidecar = StageArtifact.read(directory / "cae.pt")
    assert sidecar.fingerprint == cae.fingerprint


def test_no_resume_retrains(tiny_config, building):
    Pipeline(tiny_config, workers=1).run(building, "backbone")
    path = tiny_config.output_dir / "building" / "backbone.pt"
    before = stamp(path)
    Pipeline(tiny_config, resume=False, workers=1).run(building, "backbone")
    assert stamp(path) != before


def test_changed_cae_settings_retrain_only_the_cae(write_config, tmp_path):
    output = str(tmp_path / "run")
    first = coreseg.load_config(write_config(alpha=0.5), output=output)
    building = first.scenario("building")
    Pipeline(first, workers=1).run(building, "cae")
    directory = first.output_dir / "building"
    backbone_stamp = stamp(directory / "backbone.pt")
    old = StageArtifact.read(directory / "cae.pt")
    second = coreseg.load_config(write_config(alpha=0.25, name="b.ini"),
                                 output=output)
    Pipeline(second, workers=1).run(building, "cae")
    assert stamp(directory / "backbone.pt") == backbone_stamp
    new = StageArtifact.read(directory / "cae.pt")
    assert new.config_hash != old.config_hash
    assert new.upstream == old.upstream
    keys = Pipeline(second).keys(building)
    assert keys["backbone"] == Pipeline(first).keys(building)["backbone"]
    assert keys["cae"] == new.config_hash


def test_swapped_backbone_breaks_the_chain(tiny_config, building):
    Pipeline(tiny_config, workers=1).run(building, "cae")
    swap_backbone(tiny_config.output_dir / "building" / "backbone.pt")
    with pytest.raises(ArtifactChainError):
        Pipeline(tiny_config, workers=1).run(building, "cae")


def test_stage_errors_name_the_stage(tiny_config, building, tmp_path):
    empty = tmp_path / "empty"
    empty.mkdir()
    dataset = dataclasses.replace(tiny_config.dataset, kind="disk",
                                  root=str(empty))
    config = dataclasses.replace(tiny_config, dataset=dataset)
    with pytest.raises(StageError) as info:
        Pipeline(config, workers=1).run(building)
    assert info.value.stage == "data"


def test_reports_are_deterministic(write_config, tmp_path):
    reports = []
    for run in ("a", "b"):
        config = coreseg.load_config(write_config(seed=7),
                                     output=str(tmp_path / run))
        reports.append(run_scenario(config, "building", workers=1))
    assert reports[0] == reports[1]
    val = [np.load(tmp_path / run / "building" / "scores" / "val.npz")
           for run in ("a", "b")]
    assert np.array_equal(val[0]["errors"], val[1]["errors"])


def test_suite_writes_summary(tiny_config):
    result = run_loco_suite(tiny_config, workers=1)
    output = tiny_config.output_dir
    assert result.summary == output / "summary.html"
    for name in ("suite.csv", "suite.json", "summary.html"):
        assert (output / name).is_file()
    assert len(result.reports) == 1 and not result.failed
    assert result.aggregate.n_scenarios == 1
    text = result.summary.read_text(encoding="utf8")
    assert "Avg." in text and "building" in text


def test_suite_keeps_going_after_a_failure(tiny_config):
    Pipeline(tiny_config, workers=1).run(tiny_config.scenarios[0], "cae")
    swap_backbone(tiny_config.output_dir / "building" / "backbone.pt")
    result = run_loco_suite(tiny_config, workers=1)
    assert len(result.failed) == 1
    assert result.failed[0].status == "failed"
    assert result.failed[0].error
    assert (tiny_config.output_dir / "summary.html").is_file()


@pytest.mark.slow
def test_toy_suite_acceptance(tmp_path):
    config = coreseg.load_config(CONFIGS / "toy.ini",
                                 output=str(tmp_path / "toy"))
    result = run_loco_suite(config)
    assert not result.failed
    for report in result.reports:
        assert report.auroc_unknown >= 0.85, report
        assert report.closed_accuracy >= 0.90, report

    # Known pixels reconstruct best under their own class, and unknown
    # pixels stay further from every known class than known ones do.
    pipeline = Pipeline(config)
    for scenario in config.scenarios:
        cae = pipeline.run(scenario, "cae")
        assert cae.metadata["premise_gap"] > 0, scenario.name
        val = pipeline.run(scenario, "scores")["val"]
        k = val.num_known
        truth = val.truth
        known = (truth >= 0) & (truth < k)
        errors = val.errors[known]
        labels = truth[known]
        match = errors[np.arange(len(labels)), labels].mean()
        for j in range(k):
            wrong = errors[labels != j, j]
            assert match < wrong.mean(), (scenario.name, j)
        minimum = val.errors.min(axis=-1)
        assert minimum[truth == k].mean() > minimum[known].mean()
