"""Encode and decode ``coreseg`` objects as JSON."""

import dataclasses
import importlib
import json
import pathlib
import typing as ty
import types

import numpy as np

T1 = ty.TypeVar('T1')


class ClassCache(ty.Dict[str, T1]):

    _modules: ty.Dict[str, types.ModuleType] = {}

    def __missing__(self, key: str) -> T1:
        module_name, _, name = key.rpartition(".")
        if module_name not in self._modules:
            # Imported lazily: artifact modules import this one.
            self._modules[module_name] = importlib.import_module(module_name)
        self[key] = getattr(self._modules[module_name], name)
        return self[key]


_CLASS_CACHE: ClassCache[type] = ClassCache()


class CoresegEncoder(json.JSONEncoder):

    def default(self, x: ty.Any) -> ty.Any:
        if hasattr(x, '_to_dict'):
            return x._to_dict()
        elif dataclasses.is_dataclass(x) and not isinstance(x, type):
            return {f.name: getattr(x, f.name) for f in dataclasses.fields(x)}
        elif isinstance(x, np.ndarray):
            return x.tolist()
        elif isinstance(x, np.generic):
            return x.item()
        elif isinstance(x, (set, frozenset)):
            return sorted(x)
        elif isinstance(x, pathlib.PurePath):
            return x.as_posix()
        return json.JSONEncoder.default(self, x)


def loads(s: ty.Union[ty.Text, bytes]) -> ty.Any:
    return json.loads(s, object_hook=object_hook)


def dumps(x: ty.Any, canonical: bool = False) -> str:
    """Serialize ``x``.

    With ``canonical=True`` keys are sorted and whitespace is fixed so
    equal objects always produce equal strings (used for hashing).
    """
    if canonical:
        return json.dumps(
            x, cls=CoresegEncoder, sort_keys=True, separators=(",", ":")
        )
    return json.dumps(x, cls=CoresegEncoder, indent=2, sort_keys=True)


def object_hook(x: ty.Dict[str, ty.Any]) -> ty.Any:
    if "__coreseg__" in x:
        cls = _CLASS_CACHE[x["class"]]
        return cls(**x["kwargs"])
    return x
