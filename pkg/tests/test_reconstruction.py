import csv
import dataclasses
import json
import math

import numpy as np
import pytest
import torch
from torch.autograd import gradcheck
from torch.func import functional_call

from coreseg.core.backbone import ArchDescriptor, UNet
from coreseg.core.conditioning import onehot_condition
from coreseg.core.data import LabelMask, PatchDataset
from coreseg.core.openset import sweep_batch
from coreseg.core.reconstruction import (CAECheckpoint, CAEHyper,
                                         ConditionalAutoEncoder,
                                         ValidationScore, derangement,
                                         l1_error_map, masked_mean,
                                         sample_nonmatch_mask, train_cae,
                                         training_loss, validation_score)
from coreseg.errors import (ArtifactChainError, BatchTooSmallError,
                            EmptyDatasetError, NonFiniteInputError,
                            ShapeMismatchError)
from coreseg.tools import parameter_fingerprint


def constant(value, shape=(2, 3, 4, 4)):
    return torch.full(shape, value, dtype=torch.float64)


def test_loss_examples():
    x = constant(0.0)
    report = training_loss(x, constant(0.2), constant(0.5), alpha=-0.1)
    assert float(report.match_term) == pytest.approx(0.2)
    assert float(report.nonmatch_term) == pytest.approx(0.5)
    assert float(report.total) == pytest.approx(0.15)
    report = training_loss(x, constant(0.2), constant(0.5), alpha=0.0)
    assert float(report.total) == float(report.match_term)
    report = training_loss(x, x, constant(0.5), alpha=1.0)
    assert float(report.total) == float(report.nonmatch_term)


def test_hinge_mode():
    x = constant(0.0)
    report = training_loss(x, constant(0.1), constant(0.3), alpha=0.5,
                           mode="hinge", margin=0.5)
    assert float(report.nonmatch_term) == pytest.approx(0.2)
    assert float(report.total) == pytest.approx(0.1 + 0.5 * 0.2)
    report = training_loss(x, constant(0.1), constant(0.7), alpha=0.5,
                           mode="hinge", margin=0.5)
    assert float(report.nonmatch_term) == 0.0
    assert float(report.total) == pytest.approx(0.1)


def test_hinge_is_per_pixel():
    x = constant(0.0, (1, 1, 1, 2))
    xhat_nm = torch.tensor([[[[0.2, 0.8]]]], dtype=torch.float64)
    report = training_loss(x, x, xhat_nm, alpha=1.0, mode="hinge",
                           margin=0.5)
    # mean error is 0.5, yet the 0.2 pixel is still inside the margin
    assert float(report.nonmatch_term) == pytest.approx(0.15)
    only_far = torch.tensor([[[False, True]]])
    report = training_loss(x, x, xhat_nm, alpha=1.0, mode="hinge",
                           margin=0.5, nonmatch_valid=only_far)
    assert float(report.nonmatch_term) == 0.0
    assert float(report.match_term) == 0.0


def test_nonmatch_valid_defaults_to_valid():
    x = constant(0.0, (1, 1, 1, 2))
    xhat_nm = torch.tensor([[[[0.2, 0.8]]]], dtype=torch.float64)
    valid = torch.tensor([[[True, False]]])
    report = training_loss(x, x, xhat_nm, alpha=1.0, valid=valid)
    assert float(report.nonmatch_term) == pytest.approx(0.2)


def test_loss_masks_pixels():
    x = constant(0.0, (1, 1, 2, 2))
    xhat = torch.tensor([[[[1.0, 0.0], [0.0, 0.0]]]], dtype=torch.float64)
    valid = torch.tensor([[[False, True], [True, True]]])
    report = training_loss(x, xhat, xhat, alpha=1.0, valid=valid)
    assert float(report.match_term) == 0.0
    assert float(masked_mean(l1_error_map(x, xhat), None)) == 0.25
    empty = masked_mean(l1_error_map(x, xhat), torch.zeros_like(valid))
    assert float(empty) == 0.0


def test_loss_rejects_bad_input():
    x = constant(0.0)
    with pytest.raises(NonFiniteInputError):
        training_loss(x, x, x, alpha=float("nan"))
    with pytest.raises(NonFiniteInputError):
        training_loss(x, constant(float("inf")), x, alpha=1.0)
    with pytest.raises(ValueError):
        training_loss(x, x, x, alpha=1.0, mode="squared")
    with pytest.raises(ShapeMismatchError):
        training_loss(x, x[:1], x, alpha=1.0)


def test_derangement_has_no_fixed_point():
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 33))
        perm = derangement(n, rng)
        assert sorted(perm.tolist()) == list(range(n))
        assert not np.any(perm == np.arange(n))


def test_nonmatch_mask_needs_two_images():
    with pytest.raises(BatchTooSmallError):
        sample_nonmatch_mask(torch.zeros(1, 4, 4, dtype=torch.long), 0)
    with pytest.raises(BatchTooSmallError):
        CAEHyper(batch=1)


def test_nonmatch_mask_pairs_other_images():
    masks = [LabelMask(np.full((2, 2), i % 3), 3) for i in range(5)]
    permuted, perm = sample_nonmatch_mask(masks, 4)
    assert isinstance(permuted, list)
    for i, mask in enumerate(permuted):
        assert mask is masks[perm[i]]
        assert perm[i] != i
    tensor = torch.arange(4).view(4, 1, 1).expand(4, 2, 2)
    shuffled, perm = sample_nonmatch_mask(tensor, 1)
    assert shuffled[:, 0, 0].tolist() == perm.tolist()


def test_reconstruction_shape():
    arch = ArchDescriptor(blocks=4, base_width=4, num_classes=3,
                          in_channels=4)
    e = UNet(arch).encode(torch.rand(1, 4, 64, 64))
    cae = ConditionalAutoEncoder(arch)
    xhat = cae(e, onehot_condition(torch.zeros(1, 64, 64, dtype=torch.long),
                                   3))
    assert xhat.shape == (1, 4, 64, 64)
    assert float(xhat.min()) >= 0.0 and float(xhat.max()) <= 1.0
    with pytest.raises(ShapeMismatchError):
        cae(e, torch.zeros(1, 3, 32, 32))


@pytest.mark.parametrize("mode, alpha", [("literal", -0.3), ("hinge", 0.5)])
def test_loss_gradcheck(mode, alpha):
    torch.manual_seed(0)
    arch = ArchDescriptor(blocks=2, base_width=2, num_classes=2,
                          in_channels=1)
    with torch.no_grad():
        x = torch.rand(2, 1, 4, 4, dtype=torch.float64)
        e = UNet(arch).double().encode(x)
    cae = ConditionalAutoEncoder(arch, init_scale=0.1).double()
    names = [name for name, _ in cae.named_parameters()]
    params = tuple(
        p.detach().clone().requires_grad_(True) for p in cae.parameters()
    )
    labels = torch.tensor([[[0, 1, 1, 0]] * 4, [[1, 1, 0, 0]] * 4])
    match = onehot_condition(labels, 2).double()
    nonmatch = onehot_condition(1 - labels, 2).double()

    def loss(*flat):
        state = dict(zip(names, flat))
        xhat_m = functional_call(cae, state, (e, match))
        xhat_nm = functional_call(cae, state, (e, nonmatch))
        return training_loss(x, xhat_m, xhat_nm, alpha, mode=mode,
                             margin=0.9).total

    assert gradcheck(loss, params, eps=1e-6, atol=1e-5, rtol=1e-3)


@pytest.fixture
def trained(tiny_backbone, tiny_dataset, tmp_path):
    hyper = CAEHyper(epochs=2, batch=4, alpha=0.5)
    before = tiny_backbone.live_fingerprint()
    checkpoint = train_cae(tiny_backbone, tiny_dataset, tiny_dataset, hyper,
                           tmp_path / "cae_log.csv",
                           step_log_path=tmp_path / "cae_steps.csv")
    return checkpoint, before


def test_logged_steps_decompose(trained, tmp_path):
    with open(tmp_path / "cae_steps.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 8
    assert [int(row["epoch"]) for row in rows] == [1] * 4 + [2] * 4
    for row in rows:
        match, nonmatch, total = (float(row[k]) for k in
                                  ("match_term", "nonmatch_term", "total"))
        assert total == pytest.approx(match + 0.5 * nonmatch, rel=1e-6,
                                      abs=1e-7)


def test_metadata_keeps_epoch_rows_only(trained):
    checkpoint, _ = trained
    assert "steps" not in checkpoint.metadata
    epochs = checkpoint.metadata["epochs"]
    assert [row["epoch"] for row in epochs] == [1, 2]
    assert set(epochs[0]) == {"epoch", "match_term", "nonmatch_term",
                              "total", "val_auroc", "premise_gap"}
    assert checkpoint.metadata["best_epoch"] in (1, 2)


def test_backbone_stays_frozen(trained, tiny_backbone):
    checkpoint, before = trained
    assert tiny_backbone.live_fingerprint() == before
    assert tiny_backbone.fingerprint == before
    assert checkpoint.backbone_fingerprint == tiny_backbone.fingerprint


def test_training_log(trained, tmp_path):
    lines = (tmp_path / "cae_log.csv").read_text().splitlines()
    assert lines[0] == ("epoch,match_term,nonmatch_term,total,val_auroc,"
                        "premise_gap")
    assert len(lines) == 3


def test_premise_gap_matches_sweep(trained, tiny_backbone, tiny_dataset):
    checkpoint, _ = trained
    cae = checkpoint.model
    score = validation_score(tiny_backbone, cae, tiny_dataset, batch=4)
    loader = torch.utils.data.DataLoader(tiny_dataset, batch_size=64)
    x, y = next(iter(loader))
    volume = sweep_batch(tiny_backbone.model, cae, x, 3).double()
    known = (y >= 0) & (y < 3)
    match = volume.gather(1, y.clamp(0, 2).unsqueeze(1)).squeeze(1)[known]
    wrong = [volume[:, j][known & (y != j)].mean() for j in range(3)]
    expected = float(min(wrong)) - float(match.mean())
    assert score.match_error == pytest.approx(float(match.mean()), rel=1e-5)
    assert score.premise_gap == pytest.approx(expected, rel=1e-5, abs=1e-6)


def test_selection_prefers_premise():
    holds = ValidationScore(auroc=0.6, match_error=0.2, premise_gap=0.01)
    fails = ValidationScore(auroc=0.9, match_error=0.1, premise_gap=-0.01)
    undefined = ValidationScore(math.nan, math.nan, math.nan)
    assert holds.key() > fails.key() > undefined.key()
    assert not undefined.premise_holds
    better = ValidationScore(auroc=0.7, match_error=0.3, premise_gap=0.02)
    assert better.key() > holds.key()


def test_zero_learning_rate_keeps_cae(tiny_backbone, tiny_dataset):
    torch.manual_seed(0)
    model = ConditionalAutoEncoder(tiny_backbone.arch)
    before = parameter_fingerprint(model.state_dict().items())
    checkpoint = train_cae(tiny_backbone, tiny_dataset, tiny_dataset,
                           CAEHyper(lr=0.0, epochs=1, batch=4), model=model)
    assert checkpoint.fingerprint == before


def test_training_is_deterministic(tiny_backbone, tiny_dataset):
    hyper = CAEHyper(epochs=1, batch=4, seed=3)
    runs = [train_cae(tiny_backbone, tiny_dataset, tiny_dataset, hyper)
            for _ in range(2)]
    assert runs[0].fingerprint == runs[1].fingerprint
    assert json.dumps(runs[0].metadata["epochs"]) == json.dumps(
        runs[1].metadata["epochs"])


def test_training_needs_two_patches(tiny_backbone, tiny_patches):
    with pytest.raises(EmptyDatasetError):
        train_cae(tiny_backbone, PatchDataset(tiny_patches[:1]),
                  PatchDataset([]), CAEHyper(epochs=1, batch=2))


def test_checkpoint_round_trip(trained, tiny_backbone, tmp_path):
    checkpoint, _ = trained
    path = tmp_path / "cae.pt"
    checkpoint.save(path)
    loaded = CAECheckpoint.load(path, tiny_backbone)
    assert loaded.fingerprint == checkpoint.fingerprint
    assert loaded.hyper == dataclasses.asdict(CAEHyper(epochs=2, batch=4))
    other = dataclasses.replace(tiny_backbone, fingerprint="0" * 64)
    with pytest.raises(ArtifactChainError):
        CAECheckpoint.load(path, other)
