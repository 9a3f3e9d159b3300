"""Read and write scenes in the on-disk format.

A scene ``<root>/<scene_id>`` is three files:

- ``<scene_id>.raster.npy``: row-major H×W×C float32 array;
- ``<scene_id>.mask.npy``: row-major H×W int16 array of original ids;
- ``<scene_id>.json``: sidecar with ``channel_names``,
  ``class_names`` and ``ignore_value``.
"""

import logging
import pathlib
import typing as ty

import numpy as np

from coreseg.tools import atomic_path, json, write_text
from .patch import IGNORE, LabelMask, RasterPatch, Scene

logger = logging.getLogger(__name__)

PathLike = ty.Union[str, pathlib.Path]


def _paths(root: PathLike, scene_id: str) -> ty.Tuple[pathlib.Path, ...]:
    root = pathlib.Path(root)
    return (
        root / "{}.raster.npy".format(scene_id),
        root / "{}.mask.npy".format(scene_id),
        root / "{}.json".format(scene_id),
    )


def save_scene(
    root: PathLike,
    scene: Scene,
    class_names: ty.Sequence[str],
    ignore_value: int = IGNORE,
) -> pathlib.Path:
    """Write ``scene`` under ``root`` and return its sidecar path."""
    scene_id = scene.patch.origin[0]
    raster_path, mask_path, sidecar_path = _paths(root, scene_id)
    labels = np.where(scene.mask.ignored, ignore_value, scene.mask.labels)
    with atomic_path(raster_path) as tmp, open(tmp, "wb") as f:
        np.save(f, scene.patch.pixels.astype(np.float32))
    with atomic_path(mask_path) as tmp, open(tmp, "wb") as f:
        np.save(f, labels.astype(np.int16))
    write_text(
        sidecar_path,
        json.dumps({
            "scene_id": scene_id,
            "channel_names": list(scene.patch.channel_names),
            "class_names": list(class_names),
            "ignore_value": ignore_value,
        })
    )
    logger.debug("Saved scene %s to %s", scene_id, root)
    return sidecar_path


def load_scene(root: PathLike, scene_id: str) -> ty.Tuple[Scene, ty.List[str]]:
    """Read a scene and return it with its class names.

    Pixels equal to the sidecar ``ignore_value`` become IGNORE.
    """
    raster_path, mask_path, sidecar_path = _paths(root, scene_id)
    meta = json.loads(sidecar_path.read_text(encoding="utf8"))
    pixels = np.load(raster_path, allow_pickle=False)
    labels = np.load(mask_path, allow_pickle=False).astype(np.int64)
    labels[labels == int(meta.get("ignore_value", IGNORE))] = IGNORE
    class_names = list(meta["class_names"])
    scene = Scene(
        RasterPatch(pixels, tuple(meta["channel_names"]), (scene_id, 0, 0)),
        LabelMask(labels, len(class_names)),
    )
    return scene, class_names


def list_scenes(root: PathLike) -> ty.List[str]:
    """Return ids of all scenes stored under ``root``, sorted."""
    return sorted(
        p.name[:-len(".json")] for p in pathlib.Path(root).glob("*.json")
        if (p.parent / p.name.replace(".json", ".raster.npy")).exists()
    )
