from .decoder import ConditionalAutoEncoder, ReconstructionDecoder, decode
from .loss import (NONMATCH_MODES, LossReport, derangement, l1_error_map,
                   masked_mean, sample_nonmatch_mask, training_loss)
from .checkpoint import CAECheckpoint
from .training import (CAEHyper, ValidationScore, cae_step, train_cae,
                       validation_score)

__all__ = [
    "ConditionalAutoEncoder", "ReconstructionDecoder", "decode",
    "NONMATCH_MODES", "LossReport", "derangement", "l1_error_map",
    "masked_mean", "sample_nonmatch_mask", "training_loss", "CAECheckpoint",
    "CAEHyper", "ValidationScore", "cae_step", "train_cae",
    "validation_score"
]
