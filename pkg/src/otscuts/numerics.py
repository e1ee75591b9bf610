"""Exact scalar arithmetic shared by the polyhedral code.

Rationals are :class:`fractions.Fraction`; this module adds parsing,
rendering, the symbolic ``constant + k*d`` value used as layered-network
node keys, and the tolerance bundle used by the float solvers.
"""

from __future__ import annotations

import math
import operator
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Union

RationalLike = Union[Fraction, int, str, Decimal]

_OPS = {
    "add": operator.add,
    "sub": operator.sub,
    "mul": operator.mul,
    "div": operator.truediv,
}


def to_rational(value) -> Fraction:
    """Parse ``value`` exactly.

    Strings may be decimals (``"0.125"``, ``"-3e2"``) or ratios
    (``"1/3"``). Floats are converted via their shortest repr, so
    ``0.1`` becomes ``1/10`` rather than the binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(repr(value))
    if isinstance(value, (str, Decimal)):
        text = str(value).strip()
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"cannot parse {value!r} as a rational") from exc
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


def rational_arith(a: Fraction, b: Fraction, op: str):
    """Apply ``op`` in {add, sub, mul, div, cmp} exactly.

    ``cmp`` returns -1, 0 or 1. Division by zero raises
    :class:`ZeroDivisionError`.
    """
    a, b = to_rational(a), to_rational(b)
    if op == "cmp":
        return (a > b) - (a < b)
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown operation {op!r}") from None
    if op == "div" and b == 0:
        raise ZeroDivisionError("rational division by zero")
    return fn(a, b)


def format_rational(q: Fraction) -> str:
    """Decimal string when the expansion terminates, ``p/q`` otherwise.

    The result parses back to the same value with :func:`to_rational`.
    """
    q = to_rational(q)
    den = q.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{q.numerator}/{q.denominator}"
    if q.denominator == 1:
        return str(q.numerator)
    places = max(twos, fives)
    scaled = q * 10**places
    assert scaled.denominator == 1
    digits = str(abs(scaled.numerator)).rjust(places + 1, "0")
    sign = "-" if q < 0 else ""
    return f"{sign}{digits[:-places]}.{digits[-places:]}"


def to_float(q: Fraction) -> float:
    # Fraction.__float__ is correctly rounded
    return float(q)


@dataclass(frozen=True, order=True)
class AffineInD:
    """The value ``constant + d_coefficient * d`` kept symbolic in ``d``.

    Two instances are equal only when both fields match, so values that
    happen to coincide numerically for a particular demand stay distinct.
    """

    constant: Fraction
    d_coefficient: int = 0

    def __post_init__(self):
        object.__setattr__(self, "constant", to_rational(self.constant))
        if not isinstance(self.d_coefficient, int):
            raise TypeError("d_coefficient must be an integer")

    def __add__(self, other: "AffineInD") -> "AffineInD":
        return AffineInD(self.constant + other.constant,
                         self.d_coefficient + other.d_coefficient)

    def __sub__(self, other: "AffineInD") -> "AffineInD":
        return AffineInD(self.constant - other.constant,
                         self.d_coefficient - other.d_coefficient)

    def evaluate(self, d) -> Fraction:
        return self.constant + self.d_coefficient * to_rational(d)

    def __str__(self) -> str:
        k = self.d_coefficient
        if k == 0:
            return format_rational(self.constant)
        mag = "d" if abs(k) == 1 else f"{abs(k)}*d"
        if self.constant == 0:
            return mag if k > 0 else f"-{mag}"
        sign = "+" if k > 0 else "-"
        return f"{format_rational(self.constant)}{sign}{mag}"


def affine_eval(v: AffineInD, d) -> Fraction:
    return v.evaluate(d)


@dataclass(frozen=True)
class TolerancePolicy:
    """Tolerances for the floating-point LP/MILP layer."""

    primal_feasibility: float = 1e-7
    integrality: float = 1e-6
    cut_violation: float = 1e-6
    relative_mip_gap: float = 1e-3

    def __post_init__(self):
        for name in ("primal_feasibility", "integrality",
                     "cut_violation", "relative_mip_gap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_TOLERANCES = TolerancePolicy()
