"""Power classes and their (+/-1, +/-1) target codes."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateRangeError, InvalidInputError

TargetCode = tuple[int, int]


class PowerClass(enum.IntEnum):
    LOWEST = 1
    LOW = 2
    HIGH = 3
    HIGHEST = 4

    @property
    def label(self) -> str:
        return f"{self.name.capitalize()}-Power-Consuming"


# output neuron 1 carries the first element, neuron 2 the second
_CODES: dict[PowerClass, TargetCode] = {
    PowerClass.LOWEST: (1, 1),
    PowerClass.LOW: (-1, 1),
    PowerClass.HIGH: (1, -1),
    PowerClass.HIGHEST: (-1, -1),
}
_CLASSES = {code: cls for cls, code in _CODES.items()}


def encode(label: PowerClass | int) -> TargetCode:
    return _CODES[PowerClass(label)]


def decode(code: TargetCode) -> PowerClass:
    try:
        return _CLASSES[(int(code[0]), int(code[1]))]
    except KeyError:
        raise InvalidInputError(f"{code!r} is not a valid target code") from None


@dataclass(frozen=True)
class ClassBounds:
    min_w: float
    max_w: float
    cut1: float
    cut2: float
    cut3: float
    method: str = "equal-width"

    @property
    def cuts(self) -> tuple[float, float, float]:
        return (self.cut1, self.cut2, self.cut3)

    def to_dict(self) -> dict:
        return {"min_w": self.min_w, "max_w": self.max_w, "cuts": list(self.cuts), "method": self.method}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassBounds":
        c1, c2, c3 = (float(c) for c in d["cuts"])
        return cls(float(d["min_w"]), float(d["max_w"]), c1, c2, c3, d.get("method", "equal-width"))


def fit_bounds(watts, equal_frequency: bool = False) -> ClassBounds:
    """Quarter the observed wattage range into four equal-width intervals.

    With `equal_frequency` the cuts are the sample quartiles instead, which
    balances class sizes at the cost of uneven interval widths.
    """
    w = np.asarray(getattr(watts, "watts", watts), dtype=np.float64)
    if w.size == 0 or not np.all(np.isfinite(w)):
        raise InvalidInputError("wattage readings must be finite and nonempty")
    lo, hi = float(w.min()), float(w.max())
    if not lo < hi:
        raise DegenerateRangeError(f"all readings equal {lo:g} W; cannot form classes")
    if equal_frequency:
        c1, c2, c3 = (float(q) for q in np.quantile(w, [0.25, 0.5, 0.75]))
        if not lo < c1 < c2 < c3 < hi:
            raise DegenerateRangeError("too few distinct readings for equal-frequency classes")
        return ClassBounds(lo, hi, c1, c2, c3, "equal-frequency")
    step = (hi - lo) / 4
    return ClassBounds(lo, hi, lo + step, lo + 2 * step, lo + 3 * step)


def classify_watts(w: float, bounds: ClassBounds) -> PowerClass:
    """Right-open intervals; the top one is closed. Out-of-range values clamp."""
    if not math.isfinite(w):
        raise InvalidInputError(f"wattage {w!r} is not finite")
    if w < bounds.cut1:
        return PowerClass.LOWEST
    if w < bounds.cut2:
        return PowerClass.LOW
    if w < bounds.cut3:
        return PowerClass.HIGH
    return PowerClass.HIGHEST


def classify_many(watts, bounds: ClassBounds) -> np.ndarray:
    return np.array([int(classify_watts(float(w), bounds)) for w in watts], dtype=np.int64)


def encode_many(classes) -> np.ndarray:
    return np.array([encode(c) for c in classes], dtype=np.float64).reshape(-1, 2)
