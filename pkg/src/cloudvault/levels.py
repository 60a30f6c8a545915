"""The four-level sensitivity lattice."""

from __future__ import annotations

from enum import IntEnum


class SensitivityLevel(IntEnum):
    PUBLIC = 0
    INTERNAL = 1
    CONFIDENTIAL = 2
    SENSITIVE = 3

    @classmethod
    def parse(cls, value: "str | int | SensitivityLevel") -> "SensitivityLevel":
        """Accept a level name (any case) or an ordinal."""
        if isinstance(value, SensitivityLevel):
            return value
        if isinstance(value, int):
            return cls(value)
        text = str(value).strip()
        if text.isdigit():
            return cls(int(text))
        try:
            return cls[text.upper()]
        except KeyError:
            raise ValueError(f"unknown sensitivity level: {value!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


LOWEST = SensitivityLevel.PUBLIC
HIGHEST = SensitivityLevel.SENSITIVE


def dominates(clearance: SensitivityLevel, level: SensitivityLevel) -> bool:
    """True when an account cleared at ``clearance`` may handle data at ``level``."""
    return int(clearance) >= int(level)
