"""Atomic file writes for stage artifacts."""

import contextlib
import os
import pathlib
import tempfile
import typing as ty

PathLike = ty.Union[str, os.PathLike]


@contextlib.contextmanager
def atomic_path(path: PathLike) -> ty.Iterator[pathlib.Path]:
    """Yield a temporary path that replaces ``path`` on success.

    The temporary file lives in the destination directory so the final
    ``os.replace`` is a rename on the same filesystem. On error the
    temporary file is removed and ``path`` is left untouched.

    Examples
    --------
    >>> with atomic_path("out/backbone.pt") as tmp:
    ...     torch.save(state, tmp)
    """
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(
        prefix="." + path.name + ".", suffix=".tmp", dir=str(path.parent)
    )
    os.close(fd)
    tmp_path = pathlib.Path(tmp)
    try:
        yield tmp_path
        os.replace(tmp_path, path)
    finally:
        if tmp_path.exists():
            tmp_path.unlink()


def write_text(path: PathLike, text: str) -> None:
    with atomic_path(path) as tmp:
        tmp.write_text(text, encoding="utf8")


def write_bytes(path: PathLike, data: bytes) -> None:
    with atomic_path(path) as tmp:
        tmp.write_bytes(data)
