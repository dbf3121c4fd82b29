"""Exact scalar arithmetic: Gaussian rationals graded by powers of pi.

Every coefficient in the symbolic layer is a finite sum

    sum_j  (a_j + i b_j) * pi**n_j

with a_j, b_j rational and n_j integer.  pi is never evaluated
numerically here; parts with different pi powers never merge, which keeps
golden-term comparisons bit-stable.  Conversion to complex happens only in
the numeric backend.
"""

from __future__ import annotations

import math
from fractions import Fraction


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected int or Fraction, got {type(x).__name__}")


class Scalar:
    """Immutable exact scalar: map pi_power -> (re, im) Gaussian rational."""

    __slots__ = ("_parts",)

    def __init__(self, parts=()):
        # parts: iterable of (pi_power, re, im); merged per power, zeros dropped
        acc: dict[int, tuple[Fraction, Fraction]] = {}
        for n, re, im in parts:
            re = _as_fraction(re)
            im = _as_fraction(im)
            if n in acc:
                ore, oim = acc[n]
                re, im = ore + re, oim + im
            acc[n] = (re, im)
        object.__setattr__(
            self,
            "_parts",
            tuple(
                (n, re, im)
                for n, (re, im) in sorted(acc.items())
                if re != 0 or im != 0
            ),
        )

    def __setattr__(self, *a):
        raise AttributeError("Scalar is immutable")

    # -- constructors ------------------------------------------------------

    @staticmethod
    def of(re, im=0, pi_power: int = 0) -> "Scalar":
        return Scalar([(pi_power, re, im)])

    @staticmethod
    def zero() -> "Scalar":
        return _ZERO

    @staticmethod
    def one() -> "Scalar":
        return _ONE

    @staticmethod
    def i() -> "Scalar":
        return _I

    @staticmethod
    def pi(power: int = 1) -> "Scalar":
        return Scalar.of(1, 0, power)

    # -- basic queries -----------------------------------------------------

    @property
    def parts(self):
        return self._parts

    def is_zero(self) -> bool:
        return not self._parts

    def is_single_power(self) -> bool:
        return len(self._parts) == 1

    @property
    def pi_power(self) -> int:
        if len(self._parts) != 1:
            raise ValueError("scalar mixes pi powers")
        return self._parts[0][0]

    @property
    def re(self) -> Fraction:
        if len(self._parts) != 1:
            raise ValueError("scalar mixes pi powers")
        return self._parts[0][1]

    @property
    def im(self) -> Fraction:
        if len(self._parts) != 1:
            raise ValueError("scalar mixes pi powers")
        return self._parts[0][2]

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other: "Scalar") -> "Scalar":
        if not isinstance(other, Scalar):
            return NotImplemented
        return Scalar(self._parts + other._parts)

    def __sub__(self, other: "Scalar") -> "Scalar":
        return self + (-other)

    def __neg__(self) -> "Scalar":
        return Scalar([(n, -re, -im) for n, re, im in self._parts])

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Scalar.of(other)
        if not isinstance(other, Scalar):
            return NotImplemented
        out = []
        for n1, a1, b1 in self._parts:
            for n2, a2, b2 in other._parts:
                out.append((n1 + n2, a1 * a2 - b1 * b2, a1 * b2 + b1 * a2))
        return Scalar(out)

    __rmul__ = __mul__

    def divided_by(self, q) -> "Scalar":
        q = _as_fraction(q)
        if q == 0:
            raise ZeroDivisionError("scalar division by zero")
        return Scalar([(n, re / q, im / q) for n, re, im in self._parts])

    def __eq__(self, other) -> bool:
        return isinstance(other, Scalar) and self._parts == other._parts

    def __hash__(self) -> int:
        return hash(self._parts)

    # -- output ------------------------------------------------------------

    def to_complex(self) -> complex:
        val = 0j
        for n, re, im in self._parts:
            val += complex(re + 1j * im) * math.pi**n
        return val

    def __repr__(self) -> str:
        if not self._parts:
            return "0"
        return " + ".join(
            f"({re}{'+' if im >= 0 else ''}{im}i)pi^{n}" for n, re, im in self._parts
        )


_ZERO = Scalar()
_ONE = Scalar([(0, Fraction(1), Fraction(0))])
_I = Scalar([(0, Fraction(0), Fraction(1))])
