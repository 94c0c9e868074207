"""Exact arithmetic in real quadratic fields Q(sqrt(d)).

Rotation entries of the commensurable cases (cos phi = p/q, or phi a
multiple of pi/3, pi/4, pi/6) all live in some Q(sqrt(d)), so lattice
intersections can be decided without floating-point comparisons.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Union

Scalar = Union[int, Fraction, "QuadNumber"]


def squarefree_split(n: int) -> tuple[int, int]:
    """Return (s, d) with n == s*s*d and d squarefree."""
    if n <= 0:
        raise ValueError(f"expected a positive integer, got {n}")
    s, d = 1, 1
    rest = n
    f = 2
    while f * f <= rest:
        e = 0
        while rest % f == 0:
            rest //= f
            e += 1
        s *= f ** (e // 2)
        if e % 2:
            d *= f
        f += 1
    d *= rest
    return s, d


def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        return Fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


class QuadNumber:
    """An element a + b*sqrt(d) of Q(sqrt(d)), d squarefree.

    d == 1 denotes plain rationals (b is then always 0). Mixing two
    different non-trivial fields raises ``ValueError``.
    """

    __slots__ = ("a", "b", "d")

    def __init__(self, a=0, b=0, d: int = 1):
        a = as_fraction(a)
        b = as_fraction(b)
        if d < 1:
            raise ValueError("d must be a positive squarefree integer")
        if d == 1:
            a, b = a + b, Fraction(0)
        elif b == 0:
            d = 1
        self.a = a
        self.b = b
        self.d = d

    # construction helpers
    @classmethod
    def sqrt_of(cls, x) -> "QuadNumber":
        """sqrt(x) for a non-negative rational x, exactly."""
        x = as_fraction(x)
        if x < 0:
            raise ValueError("negative radicand")
        if x == 0:
            return cls(0)
        num, den = x.numerator * x.denominator, x.denominator
        s, d = squarefree_split(num)
        return cls(0, Fraction(s, den), d) if d > 1 else cls(Fraction(s, den))

    @staticmethod
    def coerce(x) -> "QuadNumber":
        return x if isinstance(x, QuadNumber) else QuadNumber(x)

    def _field(self, other: "QuadNumber") -> int:
        if self.d == 1:
            return other.d
        if other.d == 1 or other.d == self.d:
            return self.d
        raise ValueError(f"incompatible fields Q(sqrt({self.d})) and Q(sqrt({other.d}))")

    # ring operations
    def __add__(self, other):
        o = QuadNumber.coerce(other)
        return QuadNumber(self.a + o.a, self.b + o.b, self._field(o))

    __radd__ = __add__

    def __neg__(self):
        return QuadNumber(-self.a, -self.b, self.d)

    def __sub__(self, other):
        return self + (-QuadNumber.coerce(other))

    def __rsub__(self, other):
        return QuadNumber.coerce(other) - self

    def __mul__(self, other):
        o = QuadNumber.coerce(other)
        d = self._field(o)
        return QuadNumber(
            self.a * o.a + self.b * o.b * d, self.a * o.b + self.b * o.a, d
        )

    __rmul__ = __mul__

    def conjugate(self) -> "QuadNumber":
        return QuadNumber(self.a, -self.b, self.d)

    def field_norm(self) -> Fraction:
        return self.a * self.a - self.d * self.b * self.b

    def __truediv__(self, other):
        o = QuadNumber.coerce(other)
        n = o.field_norm()
        if n == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt(d))")
        return self * o.conjugate() * QuadNumber(1 / n)

    def __rtruediv__(self, other):
        return QuadNumber.coerce(other) / self

    def __pow__(self, n: int):
        if n < 0:
            return QuadNumber(1) / (self ** (-n))
        out, base = QuadNumber(1), self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    # order, via the real embedding sqrt(d) > 0
    def sign(self) -> int:
        a, b = self.a, self.b
        sa = (a > 0) - (a < 0)
        sb = (b > 0) - (b < 0)
        if sb == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        # opposite signs: compare a^2 with d b^2
        lhs, rhs = a * a, self.d * b * b
        if lhs == rhs:
            return 0
        return sa if lhs > rhs else sb

    def __eq__(self, other):
        if isinstance(other, (int, Fraction, QuadNumber)):
            o = QuadNumber.coerce(other)
            return self.a == o.a and self.b == o.b and (self.b == 0 or self.d == o.d)
        return NotImplemented

    def __hash__(self):
        # rationals hash like the equal Fraction so mixed containers behave
        if not self.b:
            return hash(self.a)
        return hash((self.a, self.b, self.d))

    def __lt__(self, other):
        return (self - other).sign() < 0

    def __le__(self, other):
        return (self - other).sign() <= 0

    def __gt__(self, other):
        return (self - other).sign() > 0

    def __ge__(self, other):
        return (self - other).sign() >= 0

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __bool__(self):
        return self.a != 0 or self.b != 0

    def floor(self) -> int:
        guess = math.floor(float(self))
        while self < guess:
            guess -= 1
        while self >= guess + 1:
            guess += 1
        return guess

    def round(self) -> int:
        """Nearest integer, ties rounded up."""
        return (self + Fraction(1, 2)).floor()

    def is_rational(self) -> bool:
        return self.b == 0

    def is_integer(self) -> bool:
        return self.b == 0 and self.a.denominator == 1

    def __float__(self):
        if self.b == 0:
            return float(self.a)
        return float(self.a) + float(self.b) * math.sqrt(self.d)

    def __repr__(self):
        if self.b == 0:
            return f"QuadNumber({self.a})"
        return f"QuadNumber({self.a}, {self.b}, d={self.d})"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        rad = f"sqrt({self.d})"
        tail = rad if self.b == 1 else f"-{rad}" if self.b == -1 else f"{self.b}*{rad}"
        if self.a == 0:
            return tail
        return f"{self.a} + {tail}" if not tail.startswith("-") else f"{self.a} - {tail[1:]}"

    def to_json(self) -> dict:
        return {"rational": str(self.a), "radical": str(self.b), "d": self.d}
