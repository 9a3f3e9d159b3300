import contextlib
import functools
import hashlib
import typing as ty

import torch

from coreseg.errors import (ArtifactChainError, ConfigError,
                            FingerprintDriftError, StageError)

FuncType = ty.Callable[..., ty.Any]
F = ty.TypeVar('F', bound=FuncType)


def parameter_fingerprint(
    named_tensors: ty.Iterable[ty.Tuple[str, torch.Tensor]]
) -> str:
    """Return a SHA-256 content hash of named tensors.

    Tensors are hashed in name order together with their names, dtypes
    and shapes, so renaming or reshaping a parameter changes the hash
    as well as changing any of its values.
    """
    digest = hashlib.sha256()
    for name, tensor in sorted(named_tensors, key=lambda item: item[0]):
        array = tensor.detach().cpu().contiguous().numpy()
        header = "{}|{}|{}".format(name, array.dtype.str, array.shape)
        digest.update(header.encode("utf8"))
        digest.update(array.tobytes())
    return digest.hexdigest()


class frozen_parameters(contextlib.ContextDecorator):
    """
    Context manager asserting that a module's parameters do not change.

    It can also be used as a function decorator. The fingerprint is
    recorded on entry and compared on exit; any difference raises
    :class:`coreseg.errors.FingerprintDriftError`.

    Parameters
    ----------
    module : torch.nn.Module
        Module to guard.
    prefix : str, optional
        Only parameters whose name starts with ``prefix`` are guarded.

    Examples
    --------
    >>> with frozen_parameters(backbone, prefix="encoder."):
    ...     train_cae(...)
    """

    def __init__(self, module: torch.nn.Module, prefix: str = "") -> None:
        self.module, self.prefix = module, prefix
        self.before: ty.Optional[str] = None

    def fingerprint(self) -> str:
        return parameter_fingerprint(
            (name, p) for name, p in self.module.state_dict().items()
            if name.startswith(self.prefix)
        )

    def __enter__(self) -> "frozen_parameters":
        self.before = self.fingerprint()
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        if exc_type is None:
            after = self.fingerprint()
            assert self.before is not None
            if after != self.before:
                raise FingerprintDriftError(self.before, after)
        return False


def stage(name: str) -> ty.Callable[[F], F]:
    """Return a decorator naming a pipeline stage.

    Any exception raised by the decorated method is re-raised as
    ``StageError(name, scenario, cause)``, except a :class:`StageError`
    already carrying a stage name, an :class:`ArtifactChainError` and
    a :class:`ConfigError`, which propagate unchanged. The decorated
    method takes the scenario (or its name) as first argument after
    ``self``.
    """

    def decorator(f: F) -> F:

        @functools.wraps(f)
        def wrapped(self, scenario, *args, **kwargs):
            try:
                return f(self, scenario, *args, **kwargs)
            except (StageError, ArtifactChainError, ConfigError):
                raise
            except Exception as exc:
                scenario_name = getattr(scenario, "name", str(scenario))
                raise StageError(name, scenario_name, exc) from exc

        return ty.cast(F, wrapped)

    return decorator
