"""Exact arithmetic in quadratic fields Q(sqrt(d)).

Elements are ``a + b*sqrt(d)`` with rational ``a``, ``b`` and a squarefree
integer ``d > 1``.  Rationals are the elements with ``b == 0``; they mix
freely with elements of any field.  Mixing two different irrational fields
raises ``ValueError``.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from numbers import Rational

__all__ = [
    "QuadraticNumber",
    "as_exact",
    "is_exact",
    "parse_exact",
    "squarefree_decomposition",
    "exact_floor",
]


def squarefree_decomposition(n: int) -> tuple[int, int]:
    """Return ``(q, d)`` with ``n == q*q*d`` and ``d`` squarefree.

    Trial division; meant for the small integers that show up as squared
    norms of direction vectors.
    """
    if n <= 0:
        raise ValueError("need a positive integer")
    q, d = 1, 1
    p = 2
    m = n
    while p * p <= m:
        e = 0
        while m % p == 0:
            m //= p
            e += 1
        q *= p ** (e // 2)
        if e % 2:
            d *= p
        p += 1
    d *= m
    return q, d


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    raise TypeError(f"not a rational: {x!r}")


class QuadraticNumber:
    """An element ``a + b*sqrt(d)`` of a real quadratic field."""

    __slots__ = ("a", "b", "d")

    def __init__(self, a=0, b=0, d: int = 0):
        a = _frac(a)
        b = _frac(b)
        if b == 0:
            d = 0
        else:
            if d < 2:
                raise ValueError("d must be a squarefree integer >= 2")
            q, sf = squarefree_decomposition(d)
            if q != 1:
                b, d = b * q, sf
            if d == 1:
                a, b, d = a + b, Fraction(0), 0
        self.a = a
        self.b = b
        self.d = d

    @classmethod
    def sqrt(cls, n) -> QuadraticNumber:
        """Exact square root of a nonnegative rational."""
        n = _frac(n)
        if n < 0:
            raise ValueError("negative radicand")
        if n == 0:
            return cls(0)
        # sqrt(p/q) = sqrt(p*q)/q
        q1, d = squarefree_decomposition(n.numerator * n.denominator)
        return cls(0, Fraction(q1, n.denominator), d) if d > 1 else cls(Fraction(q1, n.denominator))

    # ------------------------------------------------------------------
    def is_rational(self) -> bool:
        return self.b == 0

    def conjugate(self) -> QuadraticNumber:
        return QuadraticNumber(self.a, -self.b, self.d)

    def norm(self) -> Fraction:
        return self.a * self.a - self.b * self.b * self.d

    def _coerce(self, other):
        if isinstance(other, QuadraticNumber):
            if self.d and other.d and self.d != other.d:
                raise ValueError(f"mixing Q(sqrt({self.d})) and Q(sqrt({other.d}))")
            return other
        if isinstance(other, (int, Rational)):
            return QuadraticNumber(other)
        return None

    def _field(self, other: QuadraticNumber) -> int:
        return self.d or other.d

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return QuadraticNumber(self.a + o.a, self.b + o.b, self._field(o))

    __radd__ = __add__

    def __neg__(self):
        return QuadraticNumber(-self.a, -self.b, self.d)

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return QuadraticNumber(self.a - o.a, self.b - o.b, self._field(o))

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        d = self._field(o)
        return QuadraticNumber(
            self.a * o.a + self.b * o.b * d, self.a * o.b + self.b * o.a, d
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        n = o.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero in quadratic field")
        c = o.conjugate()
        num = self * c
        return QuadraticNumber(num.a / n, num.b / n, num.d)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return QuadraticNumber(1) / (self ** (-k))
        out = QuadraticNumber(1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    # ------------------------------------------------------------------
    def sign(self) -> int:
        sa = (self.a > 0) - (self.a < 0)
        sb = (self.b > 0) - (self.b < 0)
        if sb == 0:
            return sa
        if sa == 0 or sa == sb:
            return sb
        return sa if self.a * self.a > self.b * self.b * self.d else sb

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __eq__(self, other):
        o = self._coerce(other) if not isinstance(other, float) else None
        if o is None:
            if isinstance(other, float):
                return self.is_rational() and self.a == other
            return NotImplemented
        return self.a == o.a and self.b == o.b

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.d))

    def _cmp(self, other) -> int:
        o = self._coerce(other)
        if o is None:
            raise TypeError(f"cannot compare with {other!r}")
        return (self - o).sign()

    def __lt__(self, other):
        if isinstance(other, float):
            return float(self) < other
        return self._cmp(other) < 0

    def __le__(self, other):
        if isinstance(other, float):
            return float(self) <= other
        return self._cmp(other) <= 0

    def __gt__(self, other):
        if isinstance(other, float):
            return float(self) > other
        return self._cmp(other) > 0

    def __ge__(self, other):
        if isinstance(other, float):
            return float(self) >= other
        return self._cmp(other) >= 0

    def __float__(self) -> float:
        if self.b == 0:
            return float(self.a)
        # sqrt via integer arithmetic keeps ~60 good bits even under cancellation
        scale = 1 << 120
        num = self.a.numerator * self.b.denominator
        den = self.a.denominator * self.b.denominator
        r = self.b.numerator * self.a.denominator
        root = math.isqrt(r * r * self.d * scale * scale)
        root = root if r > 0 else -root
        return float(Fraction(num * scale + root, den * scale))

    def __floor__(self) -> int:
        if self.b == 0:
            return math.floor(self.a)
        # a + b sqrt(d) = (A + y)/D with y = +-sqrt(B^2 d) irrational, and
        # floor((A + y)/D) == floor((A + floor(y))/D) for integers A, D > 0
        D = self.a.denominator * self.b.denominator
        A = self.a.numerator * self.b.denominator
        B = self.b.numerator * self.a.denominator
        s = math.isqrt(B * B * self.d)
        fy = s if B > 0 else -s - 1
        return (A + fy) // D

    def __bool__(self):
        return bool(self.a) or bool(self.b)

    def __repr__(self):
        if self.b == 0:
            return f"QuadraticNumber({self.a})"
        return f"QuadraticNumber({self.a}, {self.b}, {self.d})"

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        return f"{self.a}{'+' if self.b > 0 else '-'}{abs(self.b)}*sqrt({self.d})"


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, QuadraticNumber)) and not isinstance(x, bool)


def as_exact(x):
    """Return ``x`` as an exact number, or raise ``TypeError`` for floats."""
    if isinstance(x, QuadraticNumber):
        return x.a if x.b == 0 else x
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    raise TypeError(f"exact arithmetic required, got {type(x).__name__}")


def exact_floor(x) -> int:
    return math.floor(x)


_TERM = re.compile(
    r"\s*([+-]?)\s*(?:(\d+(?:/\d+)?)\s*\*?\s*)?(sqrt\(\s*(\d+)\s*\))?\s*(?:/\s*(\d+))?"
)


def parse_exact(text: str):
    """Parse ``"p/q"`` or sums like ``"-1/2 + 1/2*sqrt(5)"`` or ``"(sqrt(5)-1)/2"``.

    Returns a ``Fraction`` for rationals, otherwise a ``QuadraticNumber``.
    """
    s = text.replace(" ", "")
    m = re.fullmatch(r"\((.*)\)/(\d+)", s)
    if m:
        return parse_exact(m.group(1)) / Fraction(int(m.group(2)))
    total = QuadraticNumber(0)
    pos = 0
    while pos < len(s):
        mt = _TERM.match(s, pos)
        if not mt or mt.end() == pos:
            raise ValueError(f"cannot parse exact number {text!r}")
        sign, coef, rad, radicand, div = mt.groups()
        if coef is None and rad is None:
            raise ValueError(f"cannot parse exact number {text!r}")
        c = Fraction(coef) if coef else Fraction(1)
        if div:
            c /= int(div)
        if sign == "-":
            c = -c
        term = QuadraticNumber.sqrt(int(radicand)) * c if rad else QuadraticNumber(c)
        total = total + term
        pos = mt.end()
    return total.a if total.is_rational() else total
