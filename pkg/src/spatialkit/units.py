"""Distance quantities: parsing from free text and meter normalization."""

from __future__ import annotations

import re
from dataclasses import dataclass

__all__ = ["Quantity", "QuantityExtractionError", "UNIT_TO_METERS", "extract_quantity"]

# SI and international-standard conversion factors.
UNIT_TO_METERS: dict[str, float] = {
    "meter": 1.0,
    "centimeter": 0.01,
    "millimeter": 0.001,
    "kilometer": 1000.0,
    "inch": 0.0254,
    "foot": 0.3048,
    "yard": 0.9144,
}

# Surface spellings mapped to canonical unit names. Bare "in" is deliberately
# not a unit spelling (it collides with the preposition); "in." with a period
# and the full words are accepted.
_UNIT_SPELLINGS: dict[str, str] = {
    "m": "meter", "meter": "meter", "meters": "meter",
    "metre": "meter", "metres": "meter",
    "cm": "centimeter", "centimeter": "centimeter", "centimeters": "centimeter",
    "centimetre": "centimeter", "centimetres": "centimeter",
    "mm": "millimeter", "millimeter": "millimeter", "millimeters": "millimeter",
    "millimetre": "millimeter", "millimetres": "millimeter",
    "km": "kilometer", "kilometer": "kilometer", "kilometers": "kilometer",
    "kilometre": "kilometer", "kilometres": "kilometer",
    "in.": "inch", "inch": "inch", "inches": "inch",
    "ft": "foot", "foot": "foot", "feet": "foot",
    "yd": "yard", "yds": "yard", "yard": "yard", "yards": "yard",
}

_NUMBER_UNIT_RE = re.compile(
    r"(\d+(?:\.\d+)?)\s*("
    + "|".join(sorted((re.escape(s) for s in _UNIT_SPELLINGS), key=len, reverse=True))
    + r")(?![a-zA-Z])",
    re.IGNORECASE,
)


class QuantityExtractionError(ValueError):
    """No unit-bearing quantity could be recovered from the text."""


@dataclass(frozen=True)
class Quantity:
    """A positive distance with its unit and meters-normalized value."""

    value: float
    unit: str

    def __post_init__(self) -> None:
        if self.value <= 0:
            raise ValueError(f"value={self.value} must be > 0")
        if self.unit not in UNIT_TO_METERS:
            raise ValueError(f"unknown unit {self.unit!r}")

    @property
    def meters(self) -> float:
        return self.value * UNIT_TO_METERS[self.unit]

    @classmethod
    def from_meters(cls, meters: float, unit: str) -> "Quantity":
        return cls(value=meters / UNIT_TO_METERS[unit], unit=unit)


def extract_quantity(text: str) -> Quantity:
    """Pull the final number+unit pair out of free-form answer text.

    CoT answers state the final figure last, so the last pair wins
    ("first guess 2 m, final answer 3 m" yields 3 m). Bare numbers without a
    unit raise :class:`QuantityExtractionError`.
    """
    last: Quantity | None = None
    for m in _NUMBER_UNIT_RE.finditer(text):
        value = float(m.group(1))
        if value <= 0:
            continue
        unit = _UNIT_SPELLINGS[m.group(2).lower()]
        last = Quantity(value=value, unit=unit)
    if last is None:
        raise QuantityExtractionError(f"no unit-bearing quantity in {text!r}")
    return last


_FILLER_RE = re.compile(
    r"\b(?:about|around|roughly|approximately|approx|~|circa)\b", re.IGNORECASE
)


def is_bare_number(text: str) -> bool:
    """True when the text is just a number (filler words aside), unit-free."""
    stripped = _FILLER_RE.sub(" ", text)
    stripped = stripped.strip().strip(".,!~ ")
    if not stripped:
        return False
    try:
        float(stripped)
    except ValueError:
        return False
    return True
