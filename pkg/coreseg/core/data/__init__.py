from .patch import (IGNORE, LabelMask, RasterPatch, Scene, extract_patches,
                    flip)
from .loco import LocoSpec, apply_loco, invert_loco
from .synthetic import (ClassTexture, SyntheticSceneSpec, TOY_CHANNELS,
                        TOY_CLASSES, generate_synthetic, toy_scene_spec)
from .split import ChannelNormalizer, split_counts, split_dataset
from .io import list_scenes, load_scene, save_scene
from .dataset import PatchDataset, stack_patches

__all__ = [
    "IGNORE", "LabelMask", "RasterPatch", "Scene", "extract_patches", "flip",
    "LocoSpec", "apply_loco", "invert_loco", "ClassTexture",
    "SyntheticSceneSpec", "TOY_CHANNELS", "TOY_CLASSES", "generate_synthetic",
    "toy_scene_spec", "ChannelNormalizer", "split_counts", "split_dataset",
    "list_scenes", "load_scene", "save_scene", "PatchDataset",
    "stack_patches"
]
