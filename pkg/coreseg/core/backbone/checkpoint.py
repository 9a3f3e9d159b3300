import dataclasses
import functools
import logging
import pathlib
import typing as ty

import torch

from coreseg.errors import CheckpointFormatError, FingerprintDriftError
from coreseg.tools import atomic_path, parameter_fingerprint
from .network import ArchDescriptor, UNet

logger = logging.getLogger(__name__)

MAGIC = "CORESEG-CKPT-1"
ENCODER_PREFIX = "encoder."


def encoder_fingerprint(state: ty.Mapping[str, torch.Tensor]) -> str:
    """Return the content hash of the encoder entries of ``state``."""
    return parameter_fingerprint(
        (k, v) for k, v in state.items() if k.startswith(ENCODER_PREFIX)
    )


@dataclasses.dataclass(eq=False)
class BackboneCheckpoint:
    """Trained closed-set network.

    Attributes
    ----------
    arch : ArchDescriptor
    state : dict
        Parameter tensors keyed by their module names.
    fingerprint : str
        SHA-256 of the encoder parameters.
    metadata : dict
        Free-form JSON-compatible values (class names, normalization,
        selected epoch).
    """

    arch: ArchDescriptor
    state: ty.Dict[str, torch.Tensor]
    fingerprint: str = ""
    metadata: ty.Dict[str, ty.Any] = dataclasses.field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.fingerprint:
            self.fingerprint = encoder_fingerprint(self.state)

    @classmethod
    def from_model(
        cls, model: UNet, metadata: ty.Optional[ty.Dict[str, ty.Any]] = None
    ) -> "BackboneCheckpoint":
        state = {k: v.detach().clone() for k, v in model.state_dict().items()}
        return cls(model.arch, state, metadata=dict(metadata or {}))

    def verify(self) -> None:
        """Recompute the fingerprint of the stored encoder parameters.

        Raises
        ------
        FingerprintDriftError
            When stored parameters do not match the stored fingerprint.
        """
        found = encoder_fingerprint(self.state)
        if found != self.fingerprint:
            raise FingerprintDriftError(self.fingerprint, found)

    @functools.cached_property
    def model(self) -> UNet:
        """Frozen network in eval mode built from ``state``."""
        model = UNet(self.arch)
        model.load_state_dict(self.state)
        model.eval()
        model.requires_grad_(False)
        return model

    def live_fingerprint(self) -> str:
        """Fingerprint of the encoder parameters held by ``model``."""
        return encoder_fingerprint(self.model.state_dict())

    def save(self, path: ty.Union[str, pathlib.Path]) -> None:
        payload = {
            "magic": MAGIC,
            "arch": dataclasses.asdict(self.arch),
            "state": self.state,
            "fingerprint": self.fingerprint,
            "metadata": self.metadata,
        }
        with atomic_path(path) as tmp:
            torch.save(payload, tmp)
        logger.info("Saved backbone %s to %s", self.fingerprint[:12], path)

    @classmethod
    def load(cls, path: ty.Union[str, pathlib.Path]) -> "BackboneCheckpoint":
        """Read and verify a checkpoint archive.

        Raises
        ------
        CheckpointFormatError
            When the archive magic is not ``CORESEG-CKPT-1``.
        FingerprintDriftError
            When stored parameters do not hash to the stored fingerprint.
        """
        payload = torch.load(path, map_location="cpu", weights_only=True)
        magic = payload.get("magic") if isinstance(payload, dict) else None
        if magic != MAGIC:
            raise CheckpointFormatError(str(path), MAGIC, magic)
        checkpoint = cls(
            ArchDescriptor(**payload["arch"]),
            dict(payload["state"]),
            payload["fingerprint"],
            dict(payload["metadata"]),
        )
        checkpoint.verify()
        return checkpoint
