"""``config.conf``: flat ``key=value`` settings with ``#`` comments."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import BadValue, UnknownConfigKey
from .levels import SensitivityLevel

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass(frozen=True)
class Config:
    allow_test_profile: bool = False
    min_level_for_std: SensitivityLevel = SensitivityLevel.INTERNAL
    max_attempts: int = 3
    token_ttl_s: int = 3600
    inactivity_period_s: int = 90 * 86_400
    accreditation_period_days: int = 1095

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if f.type == "int" and (type(value) is not int or value <= 0):
                raise BadValue(f"{f.name} must be a positive integer, got {value!r}")

    def to_text(self) -> str:
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, SensitivityLevel):
                value = value.label
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"


CONFIG_KEYS = tuple(f.name for f in fields(Config))


def _coerce(key: str, raw: str) -> object:
    kind = {f.name: f.type for f in fields(Config)}[key]
    raw = raw.strip()
    if kind == "bool":
        low = raw.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise BadValue(f"{key}: expected a boolean, got {raw!r}")
    if kind == "SensitivityLevel":
        try:
            return SensitivityLevel.parse(raw)
        except ValueError:
            raise BadValue(f"{key}: unknown level {raw!r}") from None
    try:
        return int(raw)
    except ValueError:
        raise BadValue(f"{key}: expected an integer, got {raw!r}") from None


def parse_config(text: str, base: Config | None = None) -> Config:
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadValue(f"line {lineno}: expected key=value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UnknownConfigKey(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw)
    return replace(base or Config(), **values)


def load_config(path: str | Path) -> Config:
    """Parse a config file; absent keys keep their defaults."""
    return parse_config(Path(path).read_text(encoding="utf-8"))


def with_setting(config: Config, key: str, raw: str) -> Config:
    if key not in CONFIG_KEYS:
        raise UnknownConfigKey(key)
    return replace(config, **{key: _coerce(key, raw)})
