import pathlib
import textwrap
import typing as ty

import numpy as np
import pytest
import torch

import coreseg
from coreseg.core.backbone import ArchDescriptor, BackboneCheckpoint, UNet
from coreseg.core.data import (LabelMask, LocoSpec, PatchDataset, Scene,
                               TOY_CLASSES, apply_loco, extract_patches,
                               generate_synthetic, toy_scene_spec)

TOY_NAMES = tuple(c.name for c in TOY_CLASSES)

TINY_INI = """
[experiment]
name = tiny
seed = {seed}

[dataset]
kind = synthetic
patch_size = 16
stride = 16
synthetic_scenes = 5
synthetic_size = 32
synthetic_grid = 4

[scenarios]
building = building

[architecture]
blocks = 2
base_width = 4

[closed]
epochs = 1
batch = 4

[cae]
epochs = {cae_epochs}
batch = 4
alpha = {alpha}

[openset]
quantiles = 0.25, 0.5, 0.75
workers = 1

[report]
panels = 1
"""


@pytest.fixture
def tiny_arch() -> ArchDescriptor:
    return ArchDescriptor(blocks=2, base_width=4, num_classes=3,
                          in_channels=4)


@pytest.fixture
def tiny_backbone(tiny_arch: ArchDescriptor) -> BackboneCheckpoint:
    torch.manual_seed(0)
    return BackboneCheckpoint.from_model(UNet(tiny_arch))


@pytest.fixture
def toy_loco() -> LocoSpec:
    return LocoSpec.from_names(TOY_NAMES, ["building"])


@pytest.fixture
def tiny_scenes() -> ty.List[Scene]:
    """Four 32×32 toy scenes in original ids."""
    return [
        generate_synthetic(toy_scene_spec(seed, size=32, grid=4))
        for seed in range(4)
    ]


@pytest.fixture
def tiny_patches(tiny_scenes: ty.List[Scene],
                 toy_loco: LocoSpec) -> ty.List[Scene]:
    """16×16 patches with masks in training ids (building is UNKNOWN)."""
    out = []
    for scene in tiny_scenes:
        remapped = Scene(scene.patch, apply_loco(scene.mask, toy_loco))
        out.extend(extract_patches(remapped, 16, 16))
    return out


@pytest.fixture
def tiny_dataset(tiny_patches: ty.List[Scene]) -> PatchDataset:
    return PatchDataset(tiny_patches)


@pytest.fixture
def write_config(tmp_path: pathlib.Path) -> ty.Callable[..., pathlib.Path]:
    """Write the tiny experiment file and return its path."""

    def write(seed: int = 0, cae_epochs: int = 1, alpha: float = 0.5,
              extra: str = "", name: str = "tiny.ini") -> pathlib.Path:
        path = tmp_path / name
        text = TINY_INI.format(seed=seed, cae_epochs=cae_epochs, alpha=alpha)
        path.write_text(text + textwrap.dedent(extra), encoding="utf8")
        return path

    return write


@pytest.fixture
def tiny_config(write_config, tmp_path: pathlib.Path
                ) -> coreseg.ExperimentConfig:
    return coreseg.load_config(write_config(), output=str(tmp_path / "run"))

