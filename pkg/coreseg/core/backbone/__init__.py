from .network import (ArchDescriptor, DoubleConv, Encoder, EncoderFeatures,
                      UNet, build_backbone, upsample_to)
from .checkpoint import BackboneCheckpoint, encoder_fingerprint
from .training import (ClosedSetHyper, CsvLog, pixel_accuracy,
                       segmentation_loss, train_closed_set, training_targets)
from .inference import (argmax_labels, as_batch, closed_logits,
                        encode_frozen, predict_closed)

__all__ = [
    "ArchDescriptor", "DoubleConv", "Encoder", "EncoderFeatures", "UNet",
    "build_backbone", "upsample_to", "BackboneCheckpoint",
    "encoder_fingerprint", "ClosedSetHyper", "CsvLog", "pixel_accuracy",
    "segmentation_loss", "train_closed_set", "training_targets",
    "argmax_labels", "as_batch", "closed_logits", "encode_frozen",
    "predict_closed"
]
