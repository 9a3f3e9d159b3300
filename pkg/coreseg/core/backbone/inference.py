import typing as ty

import numpy as np
import torch

from coreseg.core.data import LabelMask, RasterPatch
from .checkpoint import BackboneCheckpoint
from .network import EncoderFeatures

Input = ty.Union[RasterPatch, torch.Tensor]


def as_batch(patch: Input) -> torch.Tensor:
    """Return ``patch`` as an N×C×H×W float32 tensor."""
    if isinstance(patch, RasterPatch):
        return torch.from_numpy(patch.to_chw()).unsqueeze(0)
    if patch.dim() == 3:
        return patch.unsqueeze(0)
    return patch


def argmax_labels(logits: torch.Tensor) -> torch.Tensor:
    """Per-pixel argmax over the class axis; ties go to the lowest index."""
    return torch.argmax(logits, dim=1)


@torch.no_grad()
def encode_frozen(checkpoint: BackboneCheckpoint,
                  patch: Input) -> EncoderFeatures:
    """Run the frozen closed-set encoder.

    Returns features with a leading batch axis (of size 1 for a
    :class:`RasterPatch`). Parameters are never modified.

    Raises
    ------
    ChannelMismatchError
        When the patch channel count differs from the checkpoint.
    DivisibilityError
        When height or width is not divisible by ``2**(B-1)``.
    """
    return checkpoint.model.encode(as_batch(patch))


@torch.no_grad()
def closed_logits(checkpoint: BackboneCheckpoint,
                  patch: Input) -> torch.Tensor:
    logits, _ = checkpoint.model(as_batch(patch))
    return logits


def predict_closed(checkpoint: BackboneCheckpoint,
                   patch: Input) -> ty.Union[LabelMask, torch.Tensor]:
    """Closed-set prediction in ``0..K-1``.

    Returns a :class:`LabelMask` for a :class:`RasterPatch` and an
    N×H×W tensor for a tensor batch.
    """
    labels = argmax_labels(closed_logits(checkpoint, patch))
    if isinstance(patch, RasterPatch):
        return LabelMask(labels[0].numpy().astype(np.int64),
                         checkpoint.arch.num_classes)
    return labels
