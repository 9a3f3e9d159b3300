import typing as ty

import numpy as np
import torch

from coreseg.errors import EmptyDatasetError
from .patch import Scene, flip


class PatchDataset(torch.utils.data.Dataset):
    """Torch view of a list of patches.

    Items are ``(x, y)`` with ``x`` a float32 C×H×W tensor and ``y`` an
    int64 H×W tensor of training ids (UNKNOWN and IGNORE included).

    Parameters
    ----------
    patches : sequence of Scene
    flips : bool, optional
        Randomly flip patches horizontally and vertically.
    seed : int, optional
        Seed of the flip generator.
    """

    def __init__(
        self, patches: ty.Sequence[Scene], flips: bool = False, seed: int = 0
    ) -> None:
        self.patches = list(patches)
        self.flips = flips
        self._rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return len(self.patches)

    def __getitem__(self, index: int) -> ty.Tuple[torch.Tensor, torch.Tensor]:
        scene = self.patches[index]
        if self.flips:
            horizontal, vertical = self._rng.random(2) < 0.5
            scene = flip(scene, bool(horizontal), bool(vertical))
        x = torch.from_numpy(scene.patch.to_chw())
        y = torch.from_numpy(np.ascontiguousarray(scene.mask.labels))
        return x, y

    @property
    def num_known(self) -> int:
        if not self.patches:
            raise EmptyDatasetError("PatchDataset")
        return self.patches[0].mask.num_known

    @property
    def in_channels(self) -> int:
        if not self.patches:
            raise EmptyDatasetError("PatchDataset")
        return self.patches[0].patch.shape[2]


def stack_patches(
    patches: ty.Sequence[Scene]
) -> ty.Tuple[torch.Tensor, torch.Tensor]:
    """Return all patches as one N×C×H×W batch and its N×H×W labels."""
    if not patches:
        raise EmptyDatasetError("patch list")
    x = torch.from_numpy(np.stack([p.patch.to_chw() for p in patches]))
    y = torch.from_numpy(np.stack([p.mask.labels for p in patches]))
    return x, y
