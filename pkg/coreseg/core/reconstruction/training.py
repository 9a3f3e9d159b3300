import copy
import dataclasses
import logging
import math
import pathlib
import time
import typing as ty

import numpy as np
import torch
from tqdm import tqdm

from coreseg.core.backbone import (BackboneCheckpoint, CsvLog,
                                   argmax_labels)
from coreseg.core.conditioning import fill_unlabelled, onehot_condition
from coreseg.core.data import PatchDataset
from coreseg.errors import (BatchTooSmallError, EmptyDatasetError,
                            NonFiniteLossError, UndefinedAUROCError)
from coreseg.tools import frozen_parameters, torch_generator
from .checkpoint import CAECheckpoint
from .decoder import ConditionalAutoEncoder
from .loss import NONMATCH_MODES, LossReport, sample_nonmatch_mask, \
    training_loss

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class CAEHyper:
    """Conditional reconstruction hyperparameters.

    ``nonmatch_mode`` is ``"hinge"`` (second term the pixel mean of
    ``max(0, margin - |x - xhat_nm|)``) or ``"literal"`` (second term
    ``L1`` as is, usually with a negative ``alpha``).
    """

    alpha: float = 0.5
    lr: float = 1e-3
    epochs: int = 30
    batch: int = 8
    seed: int = 0
    nonmatch_mode: str = "hinge"
    margin: float = 0.5
    film_init_scale: float = 1e-4

    def __post_init__(self) -> None:
        if self.nonmatch_mode not in NONMATCH_MODES:
            raise ValueError("nonmatch_mode must be one of {}".format(
                NONMATCH_MODES))
        if self.batch < 2:
            raise BatchTooSmallError(self.batch)


EPOCH_FIELDS = ("epoch", "match_term", "nonmatch_term", "total", "val_auroc",
                "premise_gap")
STEP_FIELDS = ("epoch", "step", "match_term", "nonmatch_term", "total")


def cae_step(
    backbone: BackboneCheckpoint,
    cae: ConditionalAutoEncoder,
    x: torch.Tensor,
    y: torch.Tensor,
    hyper: CAEHyper,
    rng: np.random.Generator,
) -> LossReport:
    """Compute the match/non-match loss of one batch.

    UNKNOWN and IGNORE pixels are conditioned on the closed-set
    prediction and excluded from both loss terms. Pixels whose borrowed
    non-match label equals their own label are excluded from the
    non-match term.
    """
    num_known = backbone.arch.num_classes
    with torch.no_grad():
        logits, e = backbone.model(x)
        labels = fill_unlabelled(y, argmax_labels(logits), num_known)
    nonmatch_labels, _ = sample_nonmatch_mask(labels, rng)
    xhat_m = cae(e, onehot_condition(labels, num_known))
    xhat_nm = cae(e, onehot_condition(nonmatch_labels, num_known))
    valid = (y >= 0) & (y < num_known)
    return training_loss(x, xhat_m, xhat_nm, hyper.alpha, valid,
                         hyper.nonmatch_mode, hyper.margin,
                         nonmatch_valid=valid & (nonmatch_labels != labels))


@dataclasses.dataclass(frozen=True)
class ValidationScore:
    """Validation summary of one CAE epoch.

    ``premise_gap`` is the smallest, over classes ``j``, of the mean
    error of known pixels of another class reconstructed under ``j``,
    minus the mean true-class error of known pixels. Positive means
    every wrong condition reconstructs worse than the right one.
    """

    auroc: float
    match_error: float
    premise_gap: float

    @property
    def premise_holds(self) -> bool:
        return not math.isnan(self.premise_gap) and self.premise_gap > 0

    def key(self) -> ty.Tuple[bool, float, float]:
        """Selection key: premise first, then AUROC, then low match error."""
        return (
            self.premise_holds,
            self.auroc if not math.isnan(self.auroc) else -math.inf,
            -self.match_error if not math.isnan(self.match_error)
            else -math.inf,
        )


@torch.no_grad()
def validation_score(
    backbone: BackboneCheckpoint,
    cae: ConditionalAutoEncoder,
    val: PatchDataset,
    batch: int,
    workers: int = 1,
) -> ValidationScore:
    """Score the current CAE on validation patches.

    AUROC ranks unknown against known pixels by minimum error over the
    class sweep; it is NaN when validation has a single pixel kind. The
    premise gap is NaN when no class has wrongly conditioned pixels.
    """
    # Imported here: openset and evaluation build on this package.
    from coreseg.core.evaluation import auroc_unknown
    from coreseg.core.openset import sweep_batch

    num_known = backbone.arch.num_classes
    was_training = cae.training
    cae.eval()
    scores, truths, ignored = [], [], []
    match_sum, match_count = 0.0, 0
    wrong_sums = np.zeros(num_known)
    wrong_counts = np.zeros(num_known, np.int64)
    loader = torch.utils.data.DataLoader(val, batch_size=batch)
    for x, y in loader:
        volume = sweep_batch(backbone.model, cae, x, num_known, workers)
        scores.append(volume.min(dim=1).values.flatten().numpy())
        truths.append((y == num_known).flatten().numpy())
        ignored.append((y < 0).flatten().numpy())
        known = (y >= 0) & (y < num_known)
        if not bool(known.any()):
            continue
        match = volume.gather(1, y.clamp(0, num_known - 1).unsqueeze(1))
        match = match.squeeze(1)[known].double()
        match_sum += float(match.sum())
        match_count += int(match.numel())
        for j in range(num_known):
            wrong = known & (y != j)
            wrong_sums[j] += float(volume[:, j][wrong].double().sum())
            wrong_counts[j] += int(wrong.sum())
    cae.train(was_training)
    try:
        auroc = auroc_unknown(np.concatenate(scores),
                              np.concatenate(truths),
                              np.concatenate(ignored))
    except UndefinedAUROCError:
        auroc = math.nan
    match_error = match_sum / match_count if match_count else math.nan
    defined = wrong_counts > 0
    if match_count and defined.any():
        wrong_means = wrong_sums[defined] / wrong_counts[defined]
        premise_gap = float(wrong_means.min()) - match_error
    else:
        premise_gap = math.nan
    return ValidationScore(auroc, match_error, premise_gap)


def train_cae(
    backbone: BackboneCheckpoint,
    train: PatchDataset,
    val: PatchDataset,
    hyper: CAEHyper,
    log_path: ty.Optional[ty.Union[str, pathlib.Path]] = None,
    model: ty.Optional[ConditionalAutoEncoder] = None,
    workers: int = 1,
    step_log_path: ty.Optional[ty.Union[str, pathlib.Path]] = None,
) -> CAECheckpoint:
    """Train the conditioning encoders and decoder on a frozen backbone.

    Parameters
    ----------
    backbone : BackboneCheckpoint
        Frozen closed-set network; its encoder fingerprint is checked
        before and after training.
    train, val : PatchDataset
        Masks in training ids. Validation should contain held-out
        (UNKNOWN) pixels so epochs can be selected by AUROC.
    hyper : CAEHyper
    log_path : path, optional
        CSV receiving one row per epoch: ``epoch, match_term,
        nonmatch_term, total, val_auroc, premise_gap``.
    model : ConditionalAutoEncoder, optional
        Start from this model instead of a freshly seeded one. It is
        updated in place.
    workers : int, optional
        Threads of the validation class sweep.
    step_log_path : path, optional
        CSV receiving one row per training step: ``epoch, step,
        match_term, nonmatch_term, total``.

    Returns
    -------
    CAECheckpoint
        Parameters of the selected epoch. Epochs where the premise gap
        is positive win over those where it is not; among them the best
        validation AUROC wins, then the lowest validation match error,
        then the earliest epoch. ``metadata["epochs"]`` holds the
        per-epoch log rows.

    Raises
    ------
    EmptyDatasetError
        When ``train`` holds fewer than 2 patches.
    NonFiniteLossError
        When a step produces a NaN or infinite loss.
    FingerprintDriftError
        When the backbone changed during training.
    """
    if len(train) < 2:
        raise EmptyDatasetError("CAE training set (needs 2 patches)")
    backbone.verify()
    if model is None:
        torch.manual_seed(hyper.seed)
        model = ConditionalAutoEncoder(backbone.arch, hyper.film_init_scale)
    loader = torch.utils.data.DataLoader(
        train, batch_size=hyper.batch, shuffle=True,
        generator=torch_generator(hyper.seed)
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=hyper.lr)
    log = CsvLog(log_path, EPOCH_FIELDS)
    step_log = CsvLog(step_log_path, STEP_FIELDS)
    epochs: ty.List[ty.Dict[str, float]] = []
    best: ty.Optional[ValidationScore] = None
    best_epoch = 0
    best_state = copy.deepcopy(model.state_dict())
    start = time.perf_counter()
    progress = tqdm(
        range(1, hyper.epochs + 1), desc="cae", unit="epoch",
        disable=not logger.isEnabledFor(logging.INFO)
    )
    with frozen_parameters(backbone.model, prefix="encoder."):
        for epoch in progress:
            model.train()
            rng = np.random.default_rng([hyper.seed, epoch])
            sums = np.zeros(3)
            count = 0
            for step, (x, y) in enumerate(loader):
                if x.shape[0] < 2:
                    logger.debug("Skipping batch of size %d", x.shape[0])
                    continue
                report = cae_step(backbone, model, x, y, hyper, rng)
                if not torch.isfinite(report.total):
                    raise NonFiniteLossError("cae", epoch, step, {
                        **report.as_floats(), "lr": hyper.lr
                    })
                optimizer.zero_grad()
                report.total.backward()
                optimizer.step()
                terms = report.as_floats()
                row = [terms["match_term"], terms["nonmatch_term"],
                       terms["total"]]
                step_log.append(dict(zip(STEP_FIELDS, [epoch, step] + row)))
                sums += row
                count += 1
            means = sums / max(count, 1)
            score = ValidationScore(math.nan, math.nan, math.nan)
            if len(val):
                score = validation_score(
                    backbone, model, val, hyper.batch, workers
                )
            logger.info(
                "cae epoch %d: match=%.4f nonmatch=%.4f total=%.4f "
                "val_auroc=%.4f val_match=%.4f premise_gap=%.4f (%.1fs)",
                epoch, means[0], means[1], means[2], score.auroc,
                score.match_error, score.premise_gap,
                time.perf_counter() - start
            )
            record = dict(zip(EPOCH_FIELDS, [
                epoch, float(means[0]), float(means[1]), float(means[2]),
                score.auroc, score.premise_gap
            ]))
            log.append(record)
            epochs.append(record)
            if best is None or score.key() > best.key():
                best, best_epoch = score, epoch
                best_state = copy.deepcopy(model.state_dict())
    model.load_state_dict(best_state)
    if len(val) and best is not None and not best.premise_holds:
        logger.warning(
            "cae: no epoch reconstructs every wrong class worse than the "
            "true class (best premise gap %.4f)", best.premise_gap
        )
    best = best or ValidationScore(math.nan, math.nan, math.nan)
    logger.info("cae selected epoch %d (val_auroc=%.4f premise_gap=%.4f)",
                best_epoch, best.auroc, best.premise_gap)
    return CAECheckpoint.from_model(
        model, dataclasses.asdict(hyper), backbone.fingerprint, {
            "best_epoch": best_epoch,
            "val_auroc": best.auroc,
            "premise_gap": best.premise_gap,
            "epochs": epochs,
        }
    )
