from configparser import ConfigParser
from collections import OrderedDict
import os
import pathlib
import typing as ty

from coreseg.errors import ConfigError

__all__ = ["CaseInsensitiveDict", "Config"]


class CaseInsensitiveDict(OrderedDict):
    """OrderedDict with case-insensitive keys.

    Keys keep the spelling they were first stored with; lookups ignore
    case.
    """
    _keys: ty.Dict[str, str]

    def __init__(self, *args, **kwargs) -> None:
        self._keys = {}
        super().__init__()
        self.update(*args, **kwargs)

    def _key(self, key: str) -> str:
        return self._keys.get(key.lower(), key)

    def __contains__(self, key: object) -> bool:
        return isinstance(key, str) and key.lower() in self._keys

    def __getitem__(self, key: str) -> ty.Any:
        return super().__getitem__(self._key(key))

    def __setitem__(self, key: str, value: ty.Any) -> None:
        key = self._keys.setdefault(key.lower(), key)
        super().__setitem__(key, value)

    def __delitem__(self, key: str) -> None:
        super().__delitem__(self._key(key))
        del self._keys[key.lower()]

    def get(self, key: str, default: ty.Any = None) -> ty.Any:
        return self[key] if key in self else default


class Config(ConfigParser):
    """Parser for experiment .ini files.

    Section and option names are case-insensitive but keep their
    spelling, so scenario names such as ``Vegetation`` survive.

    Parameters
    ----------
    ini_file : str or Path
        Experiment configuration.

    Raises
    ------
    ConfigError
        When the file does not exist.
    """

    def __init__(self, ini_file: ty.Union[str, pathlib.Path]) -> None:
        super().__init__(
            strict=False, delimiters="=", dict_type=CaseInsensitiveDict,
            interpolation=None, inline_comment_prefixes=("#", ";")
        )
        self.optionxform = str  # type: ignore
        self.ini_file = str(ini_file)
        if not os.path.exists(self.ini_file):
            raise ConfigError(self.ini_file, "", None, "file not found")
        self.read(self.ini_file, encoding='utf8')

    def option(
        self,
        section: str,
        option: str,
        cast: ty.Callable[[str], ty.Any] = str,
        default: ty.Any = ConfigError,
    ) -> ty.Any:
        """Return ``cast(value)`` of an option.

        Without ``default`` the option is mandatory. Failures to cast
        are reported with the file, section and option.

        Raises
        ------
        ConfigError
            When a mandatory option is missing or its value is invalid.
        """
        if not self.has_section(section) or not self.has_option(
            section, option
        ):
            if default is ConfigError:
                raise ConfigError(self.ini_file, section, option, "missing")
            return default
        raw = self.get(section, option).strip()
        try:
            return cast(raw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(
                self.ini_file, section, option,
                "invalid value {!r} ({})".format(raw, e)
            ) from None

    def section_items(self, section: str) -> ty.List[ty.Tuple[str, str]]:
        """Options of ``section`` in file order, without defaults."""
        if not self.has_section(section):
            return []
        return [(k, v.strip()) for k, v in self._sections[section].items()]
