import copy
import csv
import dataclasses
import logging
import math
import pathlib
import time
import typing as ty

import torch
import torch.nn.functional as F
from tqdm import tqdm

from coreseg.core.data import IGNORE, PatchDataset
from coreseg.errors import EmptyDatasetError, NonFiniteLossError
from coreseg.tools import torch_generator
from .checkpoint import BackboneCheckpoint
from .network import UNet

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class ClosedSetHyper:
    lr: float = 1e-3
    epochs: int = 30
    batch: int = 8
    seed: int = 0
    weight_decay: float = 0.0


def training_targets(y: torch.Tensor, num_known: int) -> torch.Tensor:
    """Return ``y`` with UNKNOWN pixels turned into IGNORE."""
    return torch.where(y >= num_known, torch.full_like(y, IGNORE), y)


def segmentation_loss(logits: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Pixel cross-entropy averaged over known pixels.

    UNKNOWN and IGNORE pixels contribute nothing, not even to the
    normalizer. Returns 0 (with a graph) when no pixel is known.
    """
    target = training_targets(y, logits.shape[1])
    valid = target != IGNORE
    if not bool(valid.any()):
        return logits.sum() * 0.0
    return F.cross_entropy(logits, target, ignore_index=IGNORE)


@torch.no_grad()
def pixel_accuracy(model: UNet, dataset: PatchDataset, batch: int) -> float:
    """Mean accuracy over known pixels of ``dataset``.

    Returns NaN when the dataset holds no known pixel.
    """
    was_training = model.training
    model.eval()
    correct = total = 0
    loader = torch.utils.data.DataLoader(dataset, batch_size=batch)
    for x, y in loader:
        logits, _ = model(x)
        valid = training_targets(y, logits.shape[1]) != IGNORE
        correct += int((logits.argmax(1) == y)[valid].sum())
        total += int(valid.sum())
    model.train(was_training)
    return correct / total if total else math.nan


class CsvLog:
    """Append-only CSV training log."""

    def __init__(
        self, path: ty.Optional[ty.Union[str, pathlib.Path]],
        fields: ty.Sequence[str]
    ) -> None:
        self.path = None if path is None else pathlib.Path(path)
        self.fields = list(fields)

    def append(self, row: ty.Mapping[str, ty.Any]) -> None:
        if self.path is None:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        is_new = not self.path.exists()
        with open(self.path, "a", newline="", encoding="utf8") as f:
            writer = csv.DictWriter(f, fieldnames=self.fields)
            if is_new:
                writer.writeheader()
            writer.writerow({k: row[k] for k in self.fields})


def train_closed_set(
    model: UNet,
    train: PatchDataset,
    val: PatchDataset,
    hyper: ClosedSetHyper,
    log_path: ty.Optional[ty.Union[str, pathlib.Path]] = None,
    metadata: ty.Optional[ty.Dict[str, ty.Any]] = None,
) -> BackboneCheckpoint:
    """Train ``model`` on known classes and return its best epoch.

    Parameters
    ----------
    model : UNet
        Untrained (or partially trained) network, updated in place.
    train, val : PatchDataset
        Masks in training ids; UNKNOWN and IGNORE pixels are excluded
        from the loss.
    hyper : ClosedSetHyper
    log_path : path, optional
        CSV receiving ``epoch, train_loss, val_accuracy, wall_seconds``.
    metadata : dict, optional
        Stored in the returned checkpoint.

    Returns
    -------
    BackboneCheckpoint
        Parameters of the epoch with the best validation pixel accuracy
        (earliest epoch on ties; last epoch when validation has no
        known pixel).

    Raises
    ------
    EmptyDatasetError
        When ``train`` is empty.
    NonFiniteLossError
        When a step produces a NaN or infinite loss.
    """
    if len(train) == 0:
        raise EmptyDatasetError("closed-set training set")
    loader = torch.utils.data.DataLoader(
        train, batch_size=hyper.batch, shuffle=True,
        generator=torch_generator(hyper.seed)
    )
    optimizer = torch.optim.Adam(
        model.parameters(), lr=hyper.lr, weight_decay=hyper.weight_decay
    )
    log = CsvLog(
        log_path, ("epoch", "train_loss", "val_accuracy", "wall_seconds")
    )
    best_accuracy, best_epoch = -math.inf, 0
    best_state = copy.deepcopy(model.state_dict())
    start = time.perf_counter()
    progress = tqdm(
        range(1, hyper.epochs + 1), desc="closed-set", unit="epoch",
        disable=not logger.isEnabledFor(logging.INFO)
    )
    for epoch in progress:
        model.train()
        total, batches = 0.0, 0
        for step, (x, y) in enumerate(loader):
            logits, _ = model(x)
            loss = segmentation_loss(logits, y)
            if not torch.isfinite(loss):
                raise NonFiniteLossError(
                    "closed-set", epoch, step,
                    {"loss": float(loss), "lr": hyper.lr}
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            total += float(loss)
            batches += 1
        train_loss = total / max(batches, 1)
        accuracy = pixel_accuracy(model, val, hyper.batch) if len(val) else \
            math.nan
        wall = time.perf_counter() - start
        logger.info(
            "closed-set epoch %d: train_loss=%.4f val_accuracy=%.4f",
            epoch, train_loss, accuracy
        )
        log.append({
            "epoch": epoch, "train_loss": train_loss,
            "val_accuracy": accuracy, "wall_seconds": round(wall, 3)
        })
        if math.isnan(accuracy) or accuracy > best_accuracy:
            best_accuracy, best_epoch = accuracy, epoch
            best_state = copy.deepcopy(model.state_dict())
    model.load_state_dict(best_state)
    meta = dict(metadata or {})
    meta.update(best_epoch=best_epoch, val_accuracy=best_accuracy)
    logger.info(
        "closed-set selected epoch %d (val_accuracy=%.4f)",
        best_epoch, best_accuracy
    )
    return BackboneCheckpoint.from_model(model, meta)
