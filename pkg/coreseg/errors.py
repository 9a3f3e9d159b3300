"""Define custom errors."""

import typing as ty


class ArtifactChainError(Exception):
    """Raised when a stage artifact does not match its upstream.

    Parameters
    ----------
    kind : str
        Artifact kind (``"backbone"``, ``"cae"``, ``"scores"``,
        ``"report"``).
    expected : str
        Fingerprint or hash the downstream artifact recorded.
    found : str
        Fingerprint or hash actually present upstream.
    """

    def __init__(self, kind: str, expected: str, found: str) -> None:
        self.kind, self.expected, self.found = kind, expected, found
        message = (
            "{} artifact is linked to upstream {} but upstream is now {}. "
            + "Rerun the stage or remove the stale artifact."
        ).format(kind, expected[:12], found[:12])
        super().__init__(message)


class BatchTooSmallError(ValueError):

    def __init__(self, size: int) -> None:
        message = (
            "Non-match masks need at least 2 images per batch, got {}."
        ).format(size)
        super().__init__(message)


class ChannelMismatchError(ValueError):

    def __init__(self, expected: int, found: int) -> None:
        self.expected, self.found = expected, found
        message = "Expected {} input channels, got {}.".format(
            expected, found
        )
        super().__init__(message)


class CheckpointFormatError(ValueError):

    def __init__(self, path: str, expected_magic: str, found: object) -> None:
        message = "{} is not a {} archive (magic is {!r}).".format(
            path, expected_magic, found
        )
        super().__init__(message)


class ClassIndexError(IndexError):

    def __init__(self, class_id: int, num_known: int) -> None:
        self.class_id, self.num_known = class_id, num_known
        message = "Class {} out of range for {} known classes.".format(
            class_id, num_known
        )
        super().__init__(message)


class ConfigError(ValueError):
    """Raised on any configuration schema violation.

    The offending location is available as the ``path``, ``section``
    and ``option`` attributes.
    """

    def __init__(
        self,
        path: ty.Optional[str],
        section: str,
        option: ty.Optional[str],
        reason: str,
    ) -> None:
        self.path, self.section, self.option = path, section, option
        location = "[{}]".format(section)
        if option is not None:
            location += " {}".format(option)
        if path is not None:
            location = "{} {}".format(path, location)
        super().__init__("{}: {}".format(location, reason))


class DivisibilityError(ValueError):

    def __init__(self, height: int, width: int, factor: int) -> None:
        self.factor = factor
        message = (
            "Input of size {}x{} must have both sides divisible by {} "
            + "for this encoder depth."
        ).format(height, width, factor)
        super().__init__(message)


class EmptyDatasetError(ValueError):

    def __init__(self, what: str) -> None:
        super().__init__("{} is empty.".format(what))


class EmptyScoresError(ValueError):

    def __init__(self) -> None:
        super().__init__("Cannot calibrate a threshold on zero scores.")


class FingerprintDriftError(RuntimeError):
    """Raised when frozen parameters changed while they were guarded."""

    def __init__(self, before: str, after: str) -> None:
        self.before, self.after = before, after
        message = (
            "Frozen parameters changed: fingerprint {} became {}."
        ).format(before[:12], after[:12])
        super().__init__(message)


class MissingArtifactWarning(Warning):

    def __init__(self, path: str) -> None:
        super().__init__("Artifact {} is missing.".format(path))


class NonFiniteInputError(ValueError):

    def __init__(self, name: str) -> None:
        super().__init__("{} contains non-finite values.".format(name))


class NonFiniteLossError(RuntimeError):
    """Raised when training produces a NaN or infinite loss.

    Parameters
    ----------
    stage : str
    epoch : int
    step : int
    diagnostics : dict
        Last known loss terms and learning rate.
    """

    def __init__(
        self, stage: str, epoch: int, step: int,
        diagnostics: ty.Dict[str, float]
    ) -> None:
        self.stage, self.epoch, self.step = stage, epoch, step
        self.diagnostics = diagnostics
        details = ", ".join(
            "{}={}".format(k, v) for k, v in sorted(diagnostics.items())
        )
        message = "Non-finite loss in {} at epoch {}, step {} ({}).".format(
            stage, epoch, step, details
        )
        super().__init__(message)


class PaletteError(KeyError):

    def __init__(self, labels: ty.Iterable[int]) -> None:
        self.labels = sorted(labels)
        message = "Palette has no colour for labels {}.".format(self.labels)
        super().__init__(message)


class PaletteFallbackWarning(Warning):

    def __init__(self, class_name: str, rgb: ty.Tuple[int, int, int]) -> None:
        message = (
            "No default colour for class {!r}; using {} from the fallback "
            + "colour map."
        ).format(class_name, rgb)
        super().__init__(message)


class PatchSizeError(ValueError):

    def __init__(self, patch_size: int, height: int, width: int) -> None:
        message = "Patch size {} exceeds scene size {}x{}.".format(
            patch_size, height, width
        )
        super().__init__(message)


class QuantileRangeError(ValueError):

    def __init__(self, q: float) -> None:
        super().__init__("Quantile must lie in [0, 1], got {}.".format(q))


class ShapeMismatchError(ValueError):

    def __init__(self, what: str, expected: ty.Any, found: ty.Any) -> None:
        self.expected, self.found = expected, found
        message = "{}: expected shape {}, got {}.".format(
            what, tuple(expected), tuple(found)
        )
        super().__init__(message)


class SplitError(ValueError):

    def __init__(self, reason: str) -> None:
        super().__init__("Cannot split dataset: {}".format(reason))


class StageError(RuntimeError):
    """Raised when a pipeline stage fails.

    The failing stage is available as ``stage`` and the original
    exception as ``__cause__``.
    """

    def __init__(self, stage: str, scenario: str, cause: BaseException) -> None:
        self.stage, self.scenario = stage, scenario
        message = "Stage {} failed for scenario {}: {}: {}".format(
            stage, scenario, type(cause).__name__, cause
        )
        super().__init__(message)


class SyntheticSpecError(ValueError):

    def __init__(self, reason: str) -> None:
        super().__init__("Invalid synthetic scene spec: {}".format(reason))


class UndefinedAUROCError(ValueError):

    def __init__(self, n_positive: int, n_negative: int) -> None:
        self.n_positive, self.n_negative = n_positive, n_negative
        message = (
            "AUROC is undefined with {} unknown and {} known pixels."
        ).format(n_positive, n_negative)
        super().__init__(message)


class UndefinedAUROCWarning(Warning):

    def __init__(self, scenario: str) -> None:
        message = (
            "Scenario {} has no unknown pixels; AUROC reported as undefined."
        ).format(scenario)
        super().__init__(message)


class UnknownLabelError(KeyError):

    def __init__(self, label: int) -> None:
        self.label = label
        message = "Label {} is not covered by the LOCO remap.".format(label)
        super().__init__(message)
