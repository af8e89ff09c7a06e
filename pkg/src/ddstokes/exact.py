"""Exact Gaussian-rational scalars and small helpers shared by all modules.

The coefficient field throughout is Q(i): complex numbers with rational real
and imaginary parts.  Equality is exact, so divisor computations, goodness
checks and order predicates never rely on floating point unless explicitly
stated.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import sympy

_FracLike = Union[int, str, Fraction]


def _as_fraction(x: _FracLike) -> Fraction:
    if isinstance(x, Fraction):
        return x
    return Fraction(x)


@dataclass(frozen=True)
class ComplexRational:
    """An element of Q(i) with exact field arithmetic."""

    re: Fraction
    im: Fraction = Fraction(0)

    # -- constructors ---------------------------------------------------

    def __init__(self, re: _FracLike = 0, im: _FracLike = 0):
        object.__setattr__(self, "re", _as_fraction(re))
        object.__setattr__(self, "im", _as_fraction(im))

    @classmethod
    def from_pair(cls, pair) -> "ComplexRational":
        """Build from a ``["p/q", "r/s"]`` pair as used in JSON pair specs."""
        if isinstance(pair, (list, tuple)):
            if len(pair) != 2:
                raise ValueError(f"coefficient pair must have length 2: {pair!r}")
            return cls(_as_fraction(pair[0]), _as_fraction(pair[1]))
        return cls(_as_fraction(pair))

    # -- ring/field operations ------------------------------------------

    def __add__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return ComplexRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return ComplexRational(-self.re, -self.im)

    def __sub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return ComplexRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def conj(self) -> "ComplexRational":
        return ComplexRational(self.re, -self.im)

    def norm2(self) -> Fraction:
        """|z|^2 as an exact rational."""
        return self.re * self.re + self.im * self.im

    def inv(self) -> "ComplexRational":
        n = self.norm2()
        if n == 0:
            raise ZeroDivisionError("division by zero in Q(i)")
        return ComplexRational(self.re / n, -self.im / n)

    def __truediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self * other.inv()

    def __rtruediv__(self, other):
        other = _coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return other * self.inv()

    def __pow__(self, k: int):
        if k < 0:
            return self.inv() ** (-k)
        out = ComplexRational(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __bool__(self) -> bool:
        return self.re != 0 or self.im != 0

    # -- conversions ----------------------------------------------------

    def to_complex(self) -> complex:
        return complex(self.re) + 1j * complex(self.im)

    def to_sympy(self) -> sympy.Expr:
        return sympy.Rational(self.re) + sympy.I * sympy.Rational(self.im)

    @classmethod
    def from_sympy(cls, expr) -> "ComplexRational":
        expr = sympy.nsimplify(sympy.expand(expr), rational=True)
        re, im = expr.as_real_imag()
        if not (re.is_rational and im.is_rational):
            raise ValueError(f"not a Gaussian rational: {expr}")
        return cls(Fraction(int(re.p), int(re.q)), Fraction(int(im.p), int(im.q)))

    def __str__(self) -> str:
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}*i"
        sign = "+" if self.im > 0 else "-"
        return f"{self.re}{sign}{abs(self.im)}*i"

    def __repr__(self) -> str:
        return f"CC({self})"

    def to_json(self):
        return [str(self.re), str(self.im)]


def _coerce(x):
    if isinstance(x, ComplexRational):
        return x
    if isinstance(x, (int, Fraction)):
        return ComplexRational(x)
    return NotImplemented


CC = ComplexRational

CC_ZERO = CC(0)
CC_ONE = CC(1)
CC_I = CC(0, 1)
