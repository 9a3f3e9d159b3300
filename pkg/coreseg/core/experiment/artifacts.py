import dataclasses
import logging
import pathlib
import typing as ty

from coreseg.errors import ArtifactChainError
from coreseg.tools import json, write_text

logger = logging.getLogger(__name__)

KINDS = ("backbone", "cae", "scores", "report")


@dataclasses.dataclass(frozen=True)
class StageArtifact:
    """Sidecar record of one stage output.

    Written next to the artifact as ``<path>.json``. ``config_hash``
    covers every setting the stage depends on, upstream stages
    included; ``upstream`` maps upstream kinds to the fingerprints the
    stage consumed.
    """

    kind: str
    path: str
    config_hash: str
    upstream: ty.Dict[str, str] = dataclasses.field(default_factory=dict)
    fingerprint: str = ""

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError("artifact kind must be one of {}".format(KINDS))

    @staticmethod
    def sidecar(path: ty.Union[str, pathlib.Path]) -> pathlib.Path:
        path = pathlib.Path(path)
        return path.with_name(path.name + ".json")

    def _to_dict(self) -> ty.Dict[str, ty.Any]:
        return {
            "__coreseg__": True,
            "class": "{}.{}".format(type(self).__module__,
                                    type(self).__qualname__),
            "kwargs": dataclasses.asdict(self),
        }

    def write(self) -> None:
        write_text(self.sidecar(self.path), json.dumps(self))

    @classmethod
    def read(
        cls, path: ty.Union[str, pathlib.Path]
    ) -> ty.Optional["StageArtifact"]:
        """Return the sidecar of ``path``, or None when either is absent."""
        sidecar = cls.sidecar(path)
        if not sidecar.is_file() or not pathlib.Path(path).exists():
            return None
        artifact = json.loads(sidecar.read_text(encoding="utf8"))
        if not isinstance(artifact, cls):
            return None
        return artifact

    def is_current(self, config_hash: str,
                   upstream: ty.Mapping[str, str]) -> bool:
        """Whether this artifact can be reused.

        A different ``config_hash`` means the stage settings changed and
        the artifact is stale. An equal hash with different upstream
        fingerprints means an upstream artifact was swapped under it.

        Raises
        ------
        ArtifactChainError
            On an upstream fingerprint mismatch.
        """
        if config_hash != self.config_hash:
            logger.info("%s artifact %s is stale (settings changed)",
                        self.kind, self.path)
            return False
        for kind, found in upstream.items():
            expected = self.upstream.get(kind, "")
            if expected != found:
                raise ArtifactChainError(self.kind, expected, found)
        return True
