"""Persist score maps, error volumes and fused predictions."""

import io
import pathlib
import typing as ty

import numpy as np
from PIL import Image

from coreseg.tools import atomic_path, json, write_bytes, write_text
from .sweep import ErrorVolume, ScoreMap
from .threshold import OpenSetPrediction

PathLike = ty.Union[str, pathlib.Path]


def _sidecar(path: PathLike, **values: ty.Any) -> None:
    write_text(pathlib.Path(path).with_suffix(".json"), json.dumps(values))


def save_error_volume(path: PathLike, volume: ErrorVolume) -> None:
    """Write ``<path>.npz`` holding ``errors`` plus a JSON sidecar."""
    path = pathlib.Path(path).with_suffix(".npz")
    with atomic_path(path) as tmp, open(tmp, "wb") as f:
        np.savez(f, errors=volume.errors)
    _sidecar(path, kind="error_volume", class_order=list(volume.class_names),
             origin=list(volume.origin))


def load_error_volume(path: PathLike) -> ErrorVolume:
    path = pathlib.Path(path).with_suffix(".npz")
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf8"))
    with np.load(path, allow_pickle=False) as data:
        errors = data["errors"]
    origin = meta["origin"]
    return ErrorVolume(errors, tuple(meta["class_order"]),
                       (origin[0], int(origin[1]), int(origin[2])))


def save_score_map(path: PathLike, score: ScoreMap,
                   class_names: ty.Sequence[str] = (),
                   origin: ty.Sequence[ty.Any] = ("", 0, 0)) -> None:
    path = pathlib.Path(path).with_suffix(".npz")
    with atomic_path(path) as tmp, open(tmp, "wb") as f:
        np.savez(f, min_error=score.min_error,
                 argmin_class=score.argmin_class)
    _sidecar(path, kind="score_map", class_order=list(class_names),
             origin=list(origin))


def load_score_map(path: PathLike) -> ScoreMap:
    path = pathlib.Path(path).with_suffix(".npz")
    with np.load(path, allow_pickle=False) as data:
        return ScoreMap(data["min_error"], data["argmin_class"])


def export_prediction(path: PathLike, prediction: OpenSetPrediction,
                      class_names: ty.Sequence[str] = ()) -> pathlib.Path:
    """Write the fused labels as an 8-bit indexed PNG plus sidecar.

    Pixel values are training ids; UNKNOWN is ``K``.
    """
    path = pathlib.Path(path).with_suffix(".png")
    if prediction.num_known > 254:
        raise ValueError("Indexed PNG export supports at most 254 classes.")
    buffer = io.BytesIO()
    Image.fromarray(prediction.labels.astype(np.uint8)).save(buffer,
                                                            format="PNG")
    write_bytes(path, buffer.getvalue())
    _sidecar(path, kind="open_set_prediction", class_order=list(class_names),
             unknown=prediction.num_known, q=prediction.spec.q,
             tau=prediction.spec.tau,
             calibration_source=prediction.spec.calibration_source)
    return path


def read_prediction(path: PathLike) -> np.ndarray:
    with Image.open(pathlib.Path(path).with_suffix(".png")) as image:
        return np.asarray(image, dtype=np.int64)
