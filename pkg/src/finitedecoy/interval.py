"""Closed real intervals with outward rounding.

Every arithmetic result is widened by one ulp on each side, so the computed
enclosure contains the exact range of the expression over the operand boxes.
Enough for certifying sign conditions over small boxes; no attempt is made
at tightness beyond that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["Interval", "ZeroDivisionInterval"]


class ZeroDivisionInterval(ArithmeticError):
    """Division by an interval that contains zero."""


def _down(x: float) -> float:
    return x if math.isinf(x) else math.nextafter(x, -math.inf)


def _up(x: float) -> float:
    return x if math.isinf(x) else math.nextafter(x, math.inf)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(float(x), float(x))

    @staticmethod
    def _lift(other) -> "Interval":
        if isinstance(other, Interval):
            return other
        return Interval.point(other)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float) -> bool:
        return self.lo <= x <= self.hi

    def __add__(self, other):
        o = self._lift(other)
        return Interval(_down(self.lo + o.lo), _up(self.hi + o.hi))

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        o = self._lift(other)
        return Interval(_down(self.lo - o.hi), _up(self.hi - o.lo))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        prods = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(_down(min(prods)), _up(max(prods)))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._lift(other)
        if o.lo <= 0.0 <= o.hi:
            raise ZeroDivisionInterval(f"divisor {o} contains zero")
        quots = (self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi)
        return Interval(_down(min(quots)), _up(max(quots)))

    def __rtruediv__(self, other):
        return self._lift(other) / self

    def clamp_nonneg(self) -> "Interval":
        """Image under ``x -> max(x, 0)``."""
        return Interval(max(self.lo, 0.0), max(self.hi, 0.0))

    def split(self):
        m = self.mid
        return Interval(self.lo, m), Interval(m, self.hi)
