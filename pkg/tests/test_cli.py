import csv
import io

import pytest

from coreseg.__main__ import (EXIT_CHAIN, EXIT_CONFIG, EXIT_OK, EXIT_STAGE,
                              main)
from coreseg.core.data import list_scenes, load_scene
from test_experiment import swap_backbone


@pytest.fixture
def run_dir(tmp_path):
    return str(tmp_path / "run")


def test_synth_data(tmp_path, capsys):
    out = tmp_path / "scenes"
    assert main(["synth-data", "--scenes", "3", "--out", str(out),
                 "--seed", "1"]) == EXIT_OK
    assert list_scenes(out) == ["toy0000", "toy0001", "toy0002"]
    scene, class_names = load_scene(out, "toy0001")
    assert scene.patch.shape == (128, 128, 4)
    assert len(class_names) == 4
    assert "Wrote 3 scenes" in capsys.readouterr().out


def test_synth_data_follows_config(tmp_path, write_config):
    out = tmp_path / "scenes"
    assert main(["synth-data", "--config", str(write_config()), "--out",
                 str(out)]) == EXIT_OK
    assert len(list_scenes(out)) == 5
    scene, _ = load_scene(out, "toy0000")
    assert scene.patch.shape == (32, 32, 4)


def test_stage_commands_succeed(write_config, run_dir, capsys):
    config = str(write_config())
    assert main(["train-closed", "--config", config, "--out",
                 run_dir]) == EXIT_OK
    assert main(["evaluate", "--config", config, "--out", run_dir,
                 "--scenario", "building", "--resume"]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert rows[0]["scenario"] == "building"
    assert rows[-1]["scenario"] == "aggregate"


def test_missing_config_exits_2(tmp_path):
    assert main(["train-closed", "--config",
                 str(tmp_path / "absent.ini")]) == EXIT_CONFIG


def test_invalid_config_exits_2(write_config, run_dir):
    bad = write_config(extra="\n[surprise]\nvalue = 1\n")
    assert main(["run-suite", "--config", str(bad), "--out",
                 run_dir]) == EXIT_CONFIG


def test_too_few_blocks_exits_2(write_config, run_dir):
    shallow = write_config(extra="\n[architecture]\nblocks = 1\n")
    assert main(["train-closed", "--config", str(shallow), "--out",
                 run_dir]) == EXIT_CONFIG


def test_unknown_scenario_exits_2(write_config, run_dir):
    assert main(["infer", "--config", str(write_config()), "--out", run_dir,
                 "--scenario", "water"]) == EXIT_CONFIG


def test_failing_stage_exits_3(write_config, tmp_path, run_dir):
    empty = tmp_path / "empty"
    empty.mkdir()
    config = write_config(extra="""
        [dataset]
        kind = disk
        root = {}
    """.format(empty.as_posix()), name="disk.ini")
    assert main(["train-closed", "--config", str(config), "--out",
                 run_dir]) == EXIT_STAGE


def test_swapped_backbone_exits_4(write_config, tmp_path, run_dir):
    config = str(write_config())
    assert main(["train-cae", "--config", config, "--out",
                 run_dir]) == EXIT_OK
    swap_backbone(tmp_path / "run" / "building" / "backbone.pt")
    assert main(["infer", "--config", config, "--out",
                 run_dir]) == EXIT_CHAIN


def test_run_suite(write_config, tmp_path, run_dir, capsys):
    assert main(["run-suite", "--config", str(write_config()), "--out",
                 run_dir]) == EXIT_OK
    assert (tmp_path / "run" / "summary.html").is_file()
    assert "Summary:" in capsys.readouterr().out
