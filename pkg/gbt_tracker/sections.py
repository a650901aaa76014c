"""
Dict round-tripping shared by every configuration section.
Sections are plain dataclasses; this mixin adds to_dict/from_dict with
unknown-key rejection and field-path error messages.
"""

from dataclasses import MISSING, fields
from enum import Enum
from typing import Any, ClassVar, Dict, List, Type

from .exceptions import ConfigValidationError


def _plain(value: Any) -> Any:
    """Convert a field value into JSON-compatible data."""
    if isinstance(value, ConfigSection):
        return value.to_dict()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


class ConfigSection:
    """Mixin for config dataclasses."""

    # field name -> nested section class
    _nested: ClassVar[Dict[str, type]] = {}
    # field name -> enum class (scalar or list of enums)
    _enums: ClassVar[Dict[str, Type[Enum]]] = {}

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {f.name: _plain(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Dict[str, Any], path: str = "") -> "ConfigSection":
        """Create the section from a dictionary, filling defaults for missing keys."""
        where = path.rstrip(".") or "config"
        if not isinstance(data, dict):
            raise ConfigValidationError([f"{where}: expected an object, got {type(data).__name__}"])

        errors: List[str] = []
        known = {f.name: f for f in fields(cls)}
        for key in data:
            if key not in known:
                errors.append(f"{path}{key}: unknown key")

        kwargs = {}
        for key, value in data.items():
            if key not in known:
                continue
            try:
                kwargs[key] = cls._convert(known[key], value, f"{path}{key}")
            except ConfigValidationError as e:
                errors.extend(e.errors)
            except (TypeError, ValueError) as e:
                errors.append(f"{path}{key}: {e}")

        if errors:
            raise ConfigValidationError(errors)
        return cls(**kwargs)

    @classmethod
    def _convert(cls, f, value: Any, path: str) -> Any:
        if f.name in cls._nested:
            return cls._nested[f.name].from_dict(value, path + ".")
        if f.name in cls._enums:
            enum_cls = cls._enums[f.name]
            if isinstance(value, list):
                return [enum_cls(v) for v in value]
            return enum_cls(value)

        default = f.default
        if default is MISSING and f.default_factory is not MISSING:
            default = f.default_factory()

        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError(f"expected true/false, got {value!r}")
            return value
        if isinstance(default, int) and not isinstance(default, bool):
            if isinstance(value, bool) or int(value) != value:
                raise TypeError(f"expected an integer, got {value!r}")
            return int(value)
        if isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError(f"expected a number, got {value!r}")
            return float(value)
        if isinstance(default, tuple):
            if not isinstance(value, (list, tuple)) or len(value) != len(default):
                raise TypeError(f"expected a list of {len(default)} numbers, got {value!r}")
            return tuple(float(v) for v in value)
        if isinstance(default, list):
            if not isinstance(value, list):
                raise TypeError(f"expected a list, got {value!r}")
            return [tuple(v) if isinstance(v, list) else v for v in value]
        if isinstance(default, dict):
            if not isinstance(value, dict):
                raise TypeError(f"expected an object, got {value!r}")
            return dict(value)
        return value


