import dataclasses

import numpy as np
import pytest
import torch

from coreseg.core.data import (IGNORE, ChannelNormalizer, ClassTexture,
                               LabelMask, LocoSpec, PatchDataset,
                               RasterPatch, Scene, SyntheticSceneSpec,
                               apply_loco, extract_patches, flip,
                               generate_synthetic, invert_loco, list_scenes,
                               load_scene, save_scene, split_counts,
                               split_dataset, stack_patches, toy_scene_spec)
from coreseg.errors import (PatchSizeError, ShapeMismatchError, SplitError,
                            SyntheticSpecError, UnknownLabelError)

from conftest import TOY_NAMES


def test_synthetic_is_deterministic():
    spec = toy_scene_spec(7, size=64)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    assert np.array_equal(a.patch.pixels, b.patch.pixels)
    assert np.array_equal(a.mask.labels, b.mask.labels)
    other = generate_synthetic(dataclasses.replace(spec, seed=8))
    assert not np.array_equal(a.patch.pixels, other.patch.pixels)


def test_synthetic_class_counts_match_region_areas():
    scene = generate_synthetic(toy_scene_spec(3, size=64, grid=4))
    counts = np.bincount(scene.mask.labels.ravel(), minlength=4)
    assert counts.tolist() == [1024, 1024, 1024, 1024]
    assert scene.patch.shape == (64, 64, 4)
    assert scene.patch.channel_names == ("IR", "R", "G", "nDSM")
    assert scene.patch.pixels.min() >= 0 and scene.patch.pixels.max() <= 1


def test_synthetic_noise_free_regions_are_constant():
    spec = toy_scene_spec(0, size=32, grid=2, noise=0.0)
    scene = generate_synthetic(spec)
    for class_id, texture in enumerate(spec.classes):
        pixels = scene.patch.pixels[scene.mask.labels == class_id]
        assert np.allclose(pixels, texture.base, atol=1e-6)


@pytest.mark.parametrize("classes", [
    (),
    (ClassTexture("a", (0.5,), 0.1), ClassTexture("b", (0.55,), 0.1)),
    (ClassTexture("a", (0.5,), 0.1), ClassTexture("b", (0.5,), 0.1)),
])
def test_synthetic_rejects_bad_specs(classes):
    spec = SyntheticSceneSpec(classes, ((0, ), ), 8, 8, 1)
    with pytest.raises(SyntheticSpecError):
        generate_synthetic(spec)


def test_synthetic_rejects_zero_size():
    spec = dataclasses.replace(toy_scene_spec(0), height=0)
    with pytest.raises(SyntheticSpecError):
        generate_synthetic(spec)


@pytest.mark.parametrize("stride, expected", [(64, 4), (32, 9), (48, 9)])
def test_extract_patches_covers_scene(stride, expected):
    scene = generate_synthetic(toy_scene_spec(0, size=128))
    patches = extract_patches(scene, 64, stride)
    assert len(patches) == expected
    covered = np.zeros((128, 128), bool)
    for patch in patches:
        _, row, col = patch.patch.origin
        assert patch.patch.shape == (64, 64, 4)
        assert np.array_equal(
            patch.patch.pixels,
            scene.patch.pixels[row:row + 64, col:col + 64]
        )
        assert np.array_equal(
            patch.mask.labels, scene.mask.labels[row:row + 64, col:col + 64]
        )
        covered[row:row + 64, col:col + 64] = True
    assert covered.all()
    assert max(p.patch.origin[1] for p in patches) == 64


def test_extract_patches_rejects_oversized_patch():
    scene = generate_synthetic(toy_scene_spec(0, size=32))
    with pytest.raises(PatchSizeError):
        extract_patches(scene, 64, 64)


def test_raster_patch_validation():
    with pytest.raises(ShapeMismatchError):
        RasterPatch(np.zeros((4, 4)), ("a", ))
    with pytest.raises(ValueError):
        RasterPatch(np.full((2, 2, 1), np.nan), ("a", ))
    with pytest.raises(ValueError):
        RasterPatch(np.zeros((2, 2, 2)), ("a", ))
    with pytest.raises(ValueError):
        LabelMask(np.array([[0, 5]]), 3)


def test_apply_loco_remaps_ids():
    loco = LocoSpec.from_names(TOY_NAMES, ["Building"])
    assert loco.num_known == 3
    assert loco.known_names == ("impervious", "low_vegetation", "tree")
    mask = LabelMask(np.array([[0, 1], [2, IGNORE], [3, 1]]), 4)
    out = apply_loco(mask, loco)
    assert out.num_known == 3
    assert out.labels.tolist() == [[0, 3], [1, IGNORE], [2, 3]]
    assert out.unknown.sum() == 2
    assert out.ignored.sum() == 1


def test_apply_loco_holds_out_groups():
    loco = LocoSpec.from_names(TOY_NAMES, ["low_vegetation", "tree"])
    mask = LabelMask(np.array([[0, 1, 2, 3]]), 4)
    out = apply_loco(mask, loco)
    assert out.num_known == 2
    assert out.labels.tolist() == [[0, 1, 2, 2]]


def test_apply_loco_rejects_unmapped_label():
    loco = LocoSpec.from_names(TOY_NAMES, ["tree"])
    with pytest.raises(UnknownLabelError):
        apply_loco(LabelMask(np.array([[4]]), 4), loco)


def test_loco_spec_validation():
    with pytest.raises(UnknownLabelError):
        LocoSpec(TOY_NAMES, frozenset({7}))
    with pytest.raises(ValueError):
        LocoSpec(TOY_NAMES, frozenset(range(4)))
    with pytest.raises(KeyError):
        LocoSpec.from_names(TOY_NAMES, ["water"])


def test_invert_loco_restores_known_ids():
    loco = LocoSpec.from_names(TOY_NAMES, ["building"])
    original = LabelMask(np.array([[0, 1, 2, 3, IGNORE]]), 4)
    restored = invert_loco(apply_loco(original, loco), loco)
    assert restored.labels.tolist() == [[0, IGNORE, 2, 3, IGNORE]]


@pytest.mark.parametrize("n, expected", [
    (10, [6, 2, 2]), (5, [3, 1, 1]), (3, [1, 1, 1]), (7, [5, 1, 1])
])
def test_split_counts(n, expected):
    assert split_counts(n, (0.6, 0.2, 0.2)) == expected


@pytest.mark.parametrize("n, fractions", [
    (2, (0.6, 0.2, 0.2)), (10, (0.5, 0.2, 0.2)), (10, (1.2, -0.2))
])
def test_split_counts_rejects(n, fractions):
    with pytest.raises(SplitError):
        split_counts(n, fractions)


def test_split_dataset_is_disjoint_and_seeded():
    scenes = list(range(10))
    train, val, test = split_dataset(scenes, seed=3)
    assert sorted(train + val + test) == scenes
    assert (len(train), len(val), len(test)) == (6, 2, 2)
    assert split_dataset(scenes, seed=3) == (train, val, test)


def test_channel_normalizer_fits_training_range(tiny_scenes):
    normalizer = ChannelNormalizer.fit(tiny_scenes[:2])
    for scene in tiny_scenes:
        pixels = normalizer.apply(scene).patch.pixels
        assert pixels.min() >= 0.0 and pixels.max() <= 1.0
    fitted = normalizer.apply(tiny_scenes[0]).patch.pixels
    assert fitted.shape == tiny_scenes[0].patch.shape
    with pytest.raises(SplitError):
        ChannelNormalizer.fit([])


def test_channel_normalizer_maps_constant_channel_to_zero():
    scene = Scene(RasterPatch(np.full((2, 2, 1), 0.3), ("c", )),
                  LabelMask(np.zeros((2, 2)), 1))
    out = ChannelNormalizer.fit([scene]).apply(scene)
    assert np.all(out.patch.pixels == 0)


def test_scene_files_round_trip(tmp_path):
    scene = generate_synthetic(toy_scene_spec(1, size=32, scene_id="s1"))
    labels = scene.mask.labels.copy()
    labels[0, :3] = IGNORE
    scene = Scene(scene.patch, LabelMask(labels, 4))
    save_scene(tmp_path, scene, TOY_NAMES, ignore_value=255)
    assert list_scenes(tmp_path) == ["s1"]
    loaded, names = load_scene(tmp_path, "s1")
    assert names == list(TOY_NAMES)
    assert np.array_equal(loaded.patch.pixels, scene.patch.pixels)
    assert np.array_equal(loaded.mask.labels, labels)
    assert loaded.patch.origin == ("s1", 0, 0)


def test_flip_keeps_pixels_and_labels_aligned(tiny_scenes):
    scene = tiny_scenes[0]
    flipped = flip(scene, horizontal=True, vertical=True)
    assert np.array_equal(flipped.patch.pixels,
                          scene.patch.pixels[::-1, ::-1])
    assert np.array_equal(flipped.mask.labels, scene.mask.labels[::-1, ::-1])


def test_patch_dataset_items(tiny_dataset, tiny_patches):
    x, y = tiny_dataset[0]
    assert x.shape == (4, 16, 16) and x.dtype == torch.float32
    assert y.shape == (16, 16) and y.dtype == torch.int64
    assert tiny_dataset.num_known == 3
    assert tiny_dataset.in_channels == 4
    xs, ys = stack_patches(tiny_patches[:3])
    assert xs.shape == (3, 4, 16, 16) and ys.shape == (3, 16, 16)
