import numpy as np
import pytest
import torch
import torch.nn.functional as F
from torch.autograd import gradcheck
from torch.func import functional_call

from coreseg.core.backbone import (ArchDescriptor, BackboneCheckpoint,
                                   ClosedSetHyper, CsvLog, UNet,
                                   build_backbone, encode_frozen,
                                   encoder_fingerprint, pixel_accuracy,
                                   predict_closed, segmentation_loss,
                                   train_closed_set)
from coreseg.core.data import (LabelMask, LocoSpec, PatchDataset, Scene,
                               apply_loco, extract_patches,
                               generate_synthetic, toy_scene_spec)
from coreseg.errors import (ChannelMismatchError, CheckpointFormatError,
                            DivisibilityError, FingerprintDriftError)

from conftest import TOY_NAMES


def test_encoder_block_shapes():
    arch = ArchDescriptor(blocks=4, base_width=8, num_classes=3,
                          in_channels=4)
    features = build_backbone(arch, seed=0).encode(torch.rand(2, 4, 64, 64))
    assert [tuple(e.shape[1:]) for e in features] == [
        (8, 64, 64), (16, 32, 32), (32, 16, 16), (64, 8, 8)
    ]
    assert features.latent.shape == (2, 64, 8, 8)
    assert arch.block_shapes(64, 64)[-1] == (64, 8, 8)


def test_unet_outputs_logits_per_class(tiny_arch):
    logits, features = UNet(tiny_arch)(torch.rand(3, 4, 16, 16))
    assert logits.shape == (3, 3, 16, 16)
    assert len(features) == tiny_arch.blocks


def test_input_checks(tiny_arch):
    model = UNet(ArchDescriptor(blocks=4, base_width=2, num_classes=2,
                                in_channels=4))
    with pytest.raises(DivisibilityError):
        model.encode(torch.rand(1, 4, 60, 60))
    with pytest.raises(ChannelMismatchError):
        UNet(tiny_arch).encode(torch.rand(1, 3, 16, 16))


def test_segmentation_loss_ignores_unknown_and_ignore():
    torch.manual_seed(0)
    logits = torch.randn(2, 3, 4, 4)
    y = torch.randint(-1, 4, (2, 4, 4))
    known = (y >= 0) & (y < 3)
    manual = F.cross_entropy(
        logits.permute(0, 2, 3, 1)[known], y[known]
    )
    assert torch.allclose(segmentation_loss(logits, y), manual)
    unlabelled = torch.full((2, 4, 4), 3)
    loss = segmentation_loss(logits.requires_grad_(), unlabelled)
    assert float(loss) == 0.0
    loss.backward()


def test_closed_set_loss_gradcheck():
    torch.manual_seed(0)
    arch = ArchDescriptor(blocks=2, base_width=2, num_classes=2,
                          in_channels=1)
    model = UNet(arch).double()
    names = [name for name, _ in model.named_parameters()]
    params = tuple(
        p.detach().clone().requires_grad_(True) for p in model.parameters()
    )
    x = torch.rand(2, 1, 4, 4, dtype=torch.float64)
    y = torch.tensor([[[0, 1, 2, -1]] * 4, [[1, 0, 1, 0]] * 4])

    def loss(*flat):
        logits, _ = functional_call(model, dict(zip(names, flat)), (x, ))
        return segmentation_loss(logits, y)

    assert gradcheck(loss, params, eps=1e-6, atol=1e-5, rtol=1e-3)


def test_zero_learning_rate_keeps_parameters(tiny_arch, tiny_dataset):
    model = build_backbone(tiny_arch, seed=0)
    before = encoder_fingerprint(model.state_dict())
    checkpoint = train_closed_set(
        model, tiny_dataset, tiny_dataset,
        ClosedSetHyper(lr=0.0, epochs=1, batch=4)
    )
    assert checkpoint.fingerprint == before


def test_training_is_deterministic(tiny_arch, tiny_dataset):
    hyper = ClosedSetHyper(epochs=2, batch=4, seed=1)
    runs = [
        train_closed_set(build_backbone(tiny_arch, seed=1), tiny_dataset,
                         tiny_dataset, hyper)
        for _ in range(2)
    ]
    assert runs[0].fingerprint == runs[1].fingerprint
    assert runs[0].metadata["best_epoch"] == runs[1].metadata["best_epoch"]


def test_training_writes_csv_log(tiny_arch, tiny_dataset, tmp_path):
    log = tmp_path / "closed_log.csv"
    train_closed_set(build_backbone(tiny_arch, seed=0), tiny_dataset,
                     tiny_dataset, ClosedSetHyper(epochs=2, batch=8), log)
    lines = log.read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_accuracy,wall_seconds"
    assert [line.split(",")[0] for line in lines[1:]] == ["1", "2"]


def test_csv_log_without_path_is_silent(tmp_path):
    CsvLog(None, ("a", )).append({"a": 1})
    log = CsvLog(tmp_path / "x.csv", ("a", "b"))
    log.append({"a": 1, "b": 2, "c": 3})
    log.append({"a": 4, "b": 5})
    assert (tmp_path / "x.csv").read_text().splitlines() == [
        "a,b", "1,2", "4,5"
    ]


def test_checkpoint_round_trip(tiny_backbone, tmp_path):
    path = tmp_path / "backbone.pt"
    tiny_backbone.metadata["scenario"] = "building"
    tiny_backbone.save(path)
    loaded = BackboneCheckpoint.load(path)
    assert loaded.fingerprint == tiny_backbone.fingerprint
    assert loaded.arch == tiny_backbone.arch
    assert loaded.metadata["scenario"] == "building"
    assert loaded.live_fingerprint() == loaded.fingerprint


def test_checkpoint_rejects_bad_archives(tiny_backbone, tmp_path):
    path = tmp_path / "bad.pt"
    torch.save({"magic": "SOMETHING-ELSE"}, path)
    with pytest.raises(CheckpointFormatError):
        BackboneCheckpoint.load(path)
    name = next(k for k in tiny_backbone.state if k.startswith("encoder."))
    tiny_backbone.state[name] = tiny_backbone.state[name] + 1.0
    with pytest.raises(FingerprintDriftError):
        tiny_backbone.verify()


def test_frozen_inference(tiny_backbone, tiny_patches):
    patch = tiny_patches[0].patch
    before = tiny_backbone.live_fingerprint()
    features = encode_frozen(tiny_backbone, patch)
    assert features[0].shape == (1, 4, 16, 16)
    labels = predict_closed(tiny_backbone, patch)
    assert isinstance(labels, LabelMask)
    assert labels.shape == (16, 16)
    assert labels.labels.min() >= 0 and labels.labels.max() < 3
    assert tiny_backbone.live_fingerprint() == before


@pytest.mark.parametrize("bias, expected", [((0.0, 1.0, 1.0), 1),
                                            ((0.5, 0.5, 0.5), 0),
                                            ((0.0, 0.0, 2.0), 2)])
def test_closed_prediction_breaks_ties_low(tiny_arch, bias, expected):
    torch.manual_seed(0)
    model = UNet(tiny_arch)
    with torch.no_grad():
        model.head.weight.zero_()
        model.head.bias.copy_(torch.tensor(bias))
    checkpoint = BackboneCheckpoint.from_model(model)
    labels = predict_closed(checkpoint, torch.rand(2, 4, 16, 16))
    assert labels.shape == (2, 16, 16)
    assert torch.all(labels == expected)


@pytest.mark.slow
def test_two_class_toy_reaches_high_accuracy():
    loco = LocoSpec.from_names(TOY_NAMES, ["low_vegetation", "tree"])
    patches = []
    for seed in range(8):
        scene = generate_synthetic(toy_scene_spec(seed, size=64, grid=4))
        scene = Scene(scene.patch, apply_loco(scene.mask, loco))
        patches.extend(extract_patches(scene, 32, 32))
    train, val = PatchDataset(patches[:24]), PatchDataset(patches[24:])
    arch = ArchDescriptor(blocks=3, base_width=8, num_classes=2,
                          in_channels=4)
    checkpoint = train_closed_set(build_backbone(arch, seed=0), train, val,
                                  ClosedSetHyper(epochs=30, batch=4))
    accuracy = pixel_accuracy(checkpoint.model, val, 8)
    assert accuracy >= 0.95
    assert np.isclose(accuracy, checkpoint.metadata["val_accuracy"])
