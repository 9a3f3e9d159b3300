import dataclasses
import typing as ty

import numpy as np

from coreseg.errors import UnknownLabelError
from .patch import IGNORE, LabelMask


@dataclasses.dataclass(frozen=True)
class LocoSpec:
    """Leave-one-class-out scenario.

    Original class ids are positions in ``all_classes``. Every class in
    ``held_out`` maps to UNKNOWN; the others are renumbered densely in
    their original order.

    Attributes
    ----------
    all_classes : tuple of str
    held_out : frozenset of int
        Original ids treated as unknown. Several ids hide a group of
        classes at once.
    """

    all_classes: ty.Tuple[str, ...]
    held_out: ty.FrozenSet[int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "all_classes", tuple(self.all_classes))
        object.__setattr__(self, "held_out", frozenset(self.held_out))
        n = len(self.all_classes)
        for class_id in self.held_out:
            if not 0 <= class_id < n:
                raise UnknownLabelError(class_id)
        if len(self.held_out) >= n:
            raise ValueError("At least one class must stay known.")

    @classmethod
    def from_names(
        cls, all_classes: ty.Sequence[str], held_out: ty.Iterable[str]
    ) -> "LocoSpec":
        index = {name.lower(): i for i, name in enumerate(all_classes)}
        ids = set()
        for name in held_out:
            if name.lower() not in index:
                raise KeyError(
                    "Held-out class {!r} is not one of {}.".format(
                        name, list(all_classes)
                    )
                )
            ids.add(index[name.lower()])
        return cls(tuple(all_classes), frozenset(ids))

    @property
    def num_known(self) -> int:
        return len(self.all_classes) - len(self.held_out)

    @property
    def known_ids(self) -> ty.Tuple[int, ...]:
        return tuple(
            i for i in range(len(self.all_classes)) if i not in self.held_out
        )

    @property
    def known_names(self) -> ty.Tuple[str, ...]:
        return tuple(self.all_classes[i] for i in self.known_ids)

    @property
    def held_out_names(self) -> ty.Tuple[str, ...]:
        return tuple(self.all_classes[i] for i in sorted(self.held_out))

    @property
    def remap(self) -> ty.Dict[int, int]:
        """Original id -> training id (UNKNOWN for held-out ids)."""
        table = {}
        for original in range(len(self.all_classes)):
            table[original] = self.num_known
        for training, original in enumerate(self.known_ids):
            table[original] = training
        return table

    @property
    def inverse(self) -> ty.Dict[int, int]:
        """Training id -> original id for known classes."""
        return {t: o for t, o in enumerate(self.known_ids)}


def _lookup(table: ty.Mapping[int, int], labels: np.ndarray) -> np.ndarray:
    present = np.unique(labels)
    for label in present:
        if label != IGNORE and int(label) not in table:
            raise UnknownLabelError(int(label))
    lut = np.full(max(table) + 2, IGNORE, dtype=np.int64)
    for src, dst in table.items():
        lut[src] = dst
    # Index IGNORE (-1) into the trailing slot, which holds IGNORE.
    return lut[labels]


def apply_loco(mask: LabelMask, spec: LocoSpec) -> LabelMask:
    """Remap a mask in original ids to training ids.

    Held-out pixels become UNKNOWN (``spec.num_known``), known labels
    are renumbered ``0..K-1`` and IGNORE is preserved.

    Raises
    ------
    UnknownLabelError
        When ``mask`` holds a label outside ``spec.all_classes``.
    """
    return LabelMask(_lookup(spec.remap, mask.labels), spec.num_known)


def invert_loco(mask: LabelMask, spec: LocoSpec) -> LabelMask:
    """Map training ids back to original ids.

    UNKNOWN pixels cannot be attributed to a single original class when
    several classes are held out, so they become IGNORE.
    """
    table = dict(spec.inverse)
    table[spec.num_known] = IGNORE
    return LabelMask(_lookup(table, mask.labels), len(spec.all_classes))
