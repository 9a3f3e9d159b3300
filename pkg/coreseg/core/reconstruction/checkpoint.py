import dataclasses
import functools
import logging
import pathlib
import typing as ty

import torch

from coreseg.core.backbone import ArchDescriptor, BackboneCheckpoint
from coreseg.errors import ArtifactChainError, CheckpointFormatError
from coreseg.tools import atomic_path, parameter_fingerprint
from .decoder import ConditionalAutoEncoder

logger = logging.getLogger(__name__)

MAGIC = "CORESEG-CAE-1"


@dataclasses.dataclass(eq=False)
class CAECheckpoint:
    """Trained conditioning encoders and reconstruction decoder.

    ``backbone_fingerprint`` links the checkpoint to the frozen
    closed-set encoder it was trained on; loading against any other
    backbone fails.
    """

    arch: ArchDescriptor
    state: ty.Dict[str, torch.Tensor]
    hyper: ty.Dict[str, ty.Any]
    backbone_fingerprint: str
    metadata: ty.Dict[str, ty.Any] = dataclasses.field(default_factory=dict)

    @classmethod
    def from_model(
        cls, model: ConditionalAutoEncoder, hyper: ty.Dict[str, ty.Any],
        backbone_fingerprint: str,
        metadata: ty.Optional[ty.Dict[str, ty.Any]] = None
    ) -> "CAECheckpoint":
        state = {k: v.detach().clone() for k, v in model.state_dict().items()}
        return cls(model.arch, state, dict(hyper), backbone_fingerprint,
                   dict(metadata or {}))

    @property
    def fingerprint(self) -> str:
        return parameter_fingerprint(self.state.items())

    @functools.cached_property
    def model(self) -> ConditionalAutoEncoder:
        model = ConditionalAutoEncoder(self.arch)
        model.load_state_dict(self.state)
        model.eval()
        model.requires_grad_(False)
        return model

    def check_backbone(self, backbone: BackboneCheckpoint) -> None:
        """Raise ArtifactChainError unless ``backbone`` is the linked one."""
        if backbone.fingerprint != self.backbone_fingerprint:
            raise ArtifactChainError("cae", self.backbone_fingerprint,
                                     backbone.fingerprint)

    def save(self, path: ty.Union[str, pathlib.Path]) -> None:
        payload = {
            "magic": MAGIC,
            "arch": dataclasses.asdict(self.arch),
            "state": self.state,
            "hyper": self.hyper,
            "backbone_fingerprint": self.backbone_fingerprint,
            "metadata": self.metadata,
        }
        with atomic_path(path) as tmp:
            torch.save(payload, tmp)
        logger.info("Saved CAE %s to %s", self.fingerprint[:12], path)

    @classmethod
    def load(
        cls, path: ty.Union[str, pathlib.Path],
        backbone: ty.Optional[BackboneCheckpoint] = None
    ) -> "CAECheckpoint":
        """Read a CAE archive, refusing a mismatched backbone.

        Raises
        ------
        CheckpointFormatError
            When the archive magic is not ``CORESEG-CAE-1``.
        ArtifactChainError
            When ``backbone`` is given and is not the one the CAE was
            trained on.
        """
        payload = torch.load(path, map_location="cpu", weights_only=True)
        magic = payload.get("magic") if isinstance(payload, dict) else None
        if magic != MAGIC:
            raise CheckpointFormatError(str(path), MAGIC, magic)
        checkpoint = cls(
            ArchDescriptor(**payload["arch"]),
            dict(payload["state"]),
            dict(payload["hyper"]),
            payload["backbone_fingerprint"],
            dict(payload["metadata"]),
        )
        if backbone is not None:
            checkpoint.check_backbone(backbone)
        return checkpoint
