"""Value representations used by the simulator.

Detection compares values for exact equality, so every agent must compute
the same mean bit-for-bit. Two representations give that guarantee:

* fixed point: ``Fixed`` integers scaled by 2**32, mean by floor division;
* exact: ``Fraction``, used for short hand-checkable runs (denominators grow
  with every round, so long runs are impractical).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Iterable

SCALE_BITS = 32
SCALE = 1 << SCALE_BITS


class Fixed(int):
    """Fixed-point value: the integer is the real value times 2**32."""

    __slots__ = ()

    def __add__(self, other):
        return Fixed(int(self) + int(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Fixed(int(self) - int(other))

    def __repr__(self):
        return f"Fixed({float(self) / SCALE!r})"


def canonical_mean(values: Iterable) -> Any:
    """Equal-weight mean with a representation-specific rounding rule.

    ``Fixed`` inputs use floor division, which keeps the result inside
    [min, max]. Plain ints and Fractions are exact. Floats are summed in the
    given order and clamped to the input range.
    """
    vals = list(values)
    if not vals:
        raise ValueError("mean of no values")
    total = sum(vals)
    count = len(vals)
    if all(type(v) is Fixed for v in vals):
        return Fixed(total // count)
    if all(isinstance(v, (int, Fraction)) for v in vals):
        q = Fraction(total, count)
        return int(q) if q.denominator == 1 else q
    return min(max(total / count, min(vals)), max(vals))


class FixedPoint:
    name = "fixed"

    @staticmethod
    def encode(x) -> Fixed:
        if isinstance(x, Fraction):
            return Fixed(round(x * SCALE))
        return Fixed(round(float(x) * SCALE))

    @staticmethod
    def decode(v) -> float:
        return float(v) / SCALE

    @staticmethod
    def spread(values) -> float:
        return (max(values) - min(values)) / SCALE


class Exact:
    name = "exact"

    @staticmethod
    def encode(x) -> Fraction:
        if isinstance(x, float):
            return Fraction(repr(x))
        return Fraction(x)

    @staticmethod
    def decode(v) -> float:
        return float(v)

    @staticmethod
    def spread(values) -> float:
        return float(max(values) - min(values))


ARITHMETICS = {"fixed": FixedPoint, "exact": Exact}


def get_arithmetic(name: str):
    try:
        return ARITHMETICS[name]
    except KeyError:
        raise ValueError(f"unknown arithmetic {name!r}; choose from {sorted(ARITHMETICS)}") from None
