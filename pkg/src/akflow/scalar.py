"""Arbitrary-precision dyadic scalars with explicit rounding.

A Scalar is an immutable dyadic float sign * mantissa * 2**exponent carrying its
own precision (mantissa width in bits).  Arithmetic rounds to nearest-even at the
larger operand precision; comparisons are exact; transcendental functions carry
guard bits and re-round, so their error is below 2 ulp.  The exponent is an
unbounded Python int.  Backed by mpmath.libmp mpf tuples, which use exactly this
representation (normalized odd mantissa), with gmpy acceleration when available.
"""

from __future__ import annotations

import re
from fractions import Fraction

from mpmath.libmp import (
    fzero,
    from_int,
    from_man_exp,
    mpf_abs,
    mpf_add,
    mpf_ceil,
    mpf_cmp,
    mpf_div,
    mpf_exp,
    mpf_floor,
    mpf_log,
    mpf_mul,
    mpf_neg,
    mpf_pos,
    mpf_pow_int,
    mpf_shift,
    mpf_sqrt,
    mpf_sub,
    to_float,
    to_int,
)

DEFAULT_PRECISION = 4096
_GUARD = 32
_RND = "n"

_HEX_RE = re.compile(r"^([+-])0x([0-9a-f]+)\.p([+-][0-9]+)$")


class Scalar:
    """Immutable dyadic float with per-value precision."""

    __slots__ = ("_v", "_prec")

    def __init__(self, value, precision_bits: int = DEFAULT_PRECISION):
        if precision_bits <= 0:
            raise ValueError("precision_bits must be positive")
        if isinstance(value, Scalar):
            self._v = value._v
        elif isinstance(value, int):
            self._v = from_int(value)
        else:
            raise TypeError(f"cannot build Scalar from {type(value).__name__}")
        if self._v[1].bit_length() > precision_bits:
            self._v = mpf_pos(self._v, precision_bits, _RND)
        self._prec = precision_bits

    @classmethod
    def _raw(cls, v, prec: int) -> "Scalar":
        s = object.__new__(cls)
        s._v = v
        s._prec = prec
        return s

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_int(cls, n: int, precision_bits: int = DEFAULT_PRECISION) -> "Scalar":
        return cls(n, precision_bits)

    @classmethod
    def from_man_exp(cls, man: int, exp: int,
                     precision_bits: int = DEFAULT_PRECISION) -> "Scalar":
        """Exact construction of man * 2**exp; mantissa must fit the precision."""
        v = from_man_exp(man, exp)
        if v[1].bit_length() > precision_bits:
            raise ValueError("mantissa wider than precision_bits")
        return cls._raw(v, precision_bits)

    @classmethod
    def pow2(cls, e: int, precision_bits: int = DEFAULT_PRECISION) -> "Scalar":
        return cls._raw(from_man_exp(1, e), precision_bits)

    @classmethod
    def from_fraction(cls, f: Fraction, precision_bits: int = DEFAULT_PRECISION,
                      rnd: str = _RND) -> "Scalar":
        """Round p/q to precision_bits.  rnd: 'n' nearest, 'f' floor, 'c' ceiling."""
        f = Fraction(f)
        v = mpf_div(from_int(f.numerator), from_int(f.denominator),
                    precision_bits, rnd)
        return cls._raw(v, precision_bits)

    @classmethod
    def from_float(cls, x: float, precision_bits: int = DEFAULT_PRECISION) -> "Scalar":
        """Exact value of an IEEE double (used only to seed iterations)."""
        if x != x or x in (float("inf"), float("-inf")):
            raise ValueError("not a finite float")
        m, e = x.as_integer_ratio()
        return cls.from_fraction(Fraction(m, e), precision_bits)

    @classmethod
    def zero(cls, precision_bits: int = DEFAULT_PRECISION) -> "Scalar":
        return cls._raw(fzero, precision_bits)

    @classmethod
    def one(cls, precision_bits: int = DEFAULT_PRECISION) -> "Scalar":
        return cls._raw(from_int(1), precision_bits)

    @classmethod
    def from_hex(cls, s: str, precision_bits: int | None = None) -> "Scalar":
        """Parse the serialization format '<sign>0x<man-hex>.p<exp>' exactly."""
        m = _HEX_RE.match(s)
        if not m:
            raise ValueError(f"bad scalar literal: {s!r}")
        sign, man_hex, exp = m.group(1), m.group(2), int(m.group(3))
        man = int(man_hex, 16)
        if man == 0:
            if sign == "-" or exp != 0:
                raise ValueError(f"non-canonical zero: {s!r}")
            return cls.zero(precision_bits or DEFAULT_PRECISION)
        if man % 2 == 0:
            raise ValueError(f"mantissa not normalized: {s!r}")
        prec = precision_bits or max(DEFAULT_PRECISION, man.bit_length())
        if man.bit_length() > prec:
            raise ValueError("mantissa wider than requested precision")
        return cls.from_man_exp(-man if sign == "-" else man, exp, prec)

    # -- structure ---------------------------------------------------------

    @property
    def precision_bits(self) -> int:
        return self._prec

    @property
    def sign(self) -> int:
        """-1, 0 or +1."""
        if self._v == fzero:
            return 0
        return -1 if self._v[0] else 1

    @property
    def mantissa(self) -> int:
        return int(self._v[1])

    @property
    def exponent(self) -> int:
        return int(self._v[2])

    @property
    def is_zero(self) -> bool:
        return self._v == fzero

    @property
    def is_integer(self) -> bool:
        return self._v == fzero or self._v[2] >= 0

    def to_hex(self) -> str:
        if self._v == fzero:
            return "+0x0.p+0"
        sign = "-" if self._v[0] else "+"
        return f"{sign}0x{self._v[1]:x}.p{self._v[2]:+d}"

    def as_fraction(self) -> Fraction:
        if self._v == fzero:
            return Fraction(0)
        man = -self._v[1] if self._v[0] else self._v[1]
        exp = self._v[2]
        if exp >= 0:
            return Fraction(int(man) << exp)
        return Fraction(int(man), 1 << -exp)

    def to_int(self) -> int:
        if not self.is_integer:
            raise ValueError("not an integer value")
        return int(to_int(self._v))

    def floor(self) -> int:
        return int(to_int(mpf_floor(self._v, 0)))

    def ceil(self) -> int:
        return int(to_int(mpf_ceil(self._v, 0)))

    def with_precision(self, precision_bits: int) -> "Scalar":
        """Re-round to a different precision."""
        return Scalar._raw(mpf_pos(self._v, precision_bits, _RND), precision_bits)

    def shift(self, k: int) -> "Scalar":
        """Exact multiplication by 2**k."""
        return Scalar._raw(mpf_shift(self._v, k), self._prec)

    def ulp_exponent(self) -> int:
        """Exponent e such that one ulp of self is 2**e (self nonzero)."""
        if self._v == fzero:
            raise ValueError("zero has no ulp")
        return self._v[2] + self._v[1].bit_length() - self._prec

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Scalar):
            return other
        if isinstance(other, int):
            return Scalar(other, self._prec)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        prec = max(self._prec, o._prec)
        return Scalar._raw(mpf_add(self._v, o._v, prec, _RND), prec)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        prec = max(self._prec, o._prec)
        return Scalar._raw(mpf_sub(self._v, o._v, prec, _RND), prec)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        prec = max(self._prec, o._prec)
        return Scalar._raw(mpf_sub(o._v, self._v, prec, _RND), prec)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        prec = max(self._prec, o._prec)
        return Scalar._raw(mpf_mul(self._v, o._v, prec, _RND), prec)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if o._v == fzero:
            raise ZeroDivisionError("scalar division by zero")
        prec = max(self._prec, o._prec)
        return Scalar._raw(mpf_div(self._v, o._v, prec, _RND), prec)

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o.__truediv__(self)

    def __neg__(self):
        return Scalar._raw(mpf_neg(self._v), self._prec)

    def __abs__(self):
        return Scalar._raw(mpf_abs(self._v), self._prec)

    def __pow__(self, n):
        if not isinstance(n, int):
            return NotImplemented
        v = mpf_pow_int(self._v, n, self._prec + _GUARD, _RND)
        return Scalar._raw(mpf_pos(v, self._prec, _RND), self._prec)

    # -- transcendental ------------------------------------------------------

    def exp(self) -> "Scalar":
        v = mpf_exp(self._v, self._prec + _GUARD, _RND)
        return Scalar._raw(mpf_pos(v, self._prec, _RND), self._prec)

    def log(self) -> "Scalar":
        if self.sign <= 0:
            raise ValueError("log requires a positive value")
        v = mpf_log(self._v, self._prec + _GUARD, _RND)
        return Scalar._raw(mpf_pos(v, self._prec, _RND), self._prec)

    def sqrt(self) -> "Scalar":
        if self.sign < 0:
            raise ValueError("sqrt requires a nonnegative value")
        v = mpf_sqrt(self._v, self._prec + _GUARD, _RND)
        return Scalar._raw(mpf_pos(v, self._prec, _RND), self._prec)

    # -- comparisons (exact) --------------------------------------------------

    def _cmp(self, other) -> int:
        o = self._coerce(other)
        if o is None:
            raise TypeError(f"cannot compare Scalar with {type(other).__name__}")
        return mpf_cmp(self._v, o._v)

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return mpf_cmp(self._v, o._v) == 0

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __hash__(self):
        return hash(self._v)

    def cmp_fraction(self, f: Fraction) -> int:
        """Exact comparison against a rational: -1, 0 or +1."""
        d = self.as_fraction() - Fraction(f)
        return (d > 0) - (d < 0)

    # -- misc -----------------------------------------------------------------

    def __float__(self):
        try:
            return to_float(self._v)
        except OverflowError:
            return float("-inf") if self._v[0] else float("inf")

    def __bool__(self):
        return self._v != fzero

    def __repr__(self):
        h = self.to_hex()
        if len(h) > 40:
            h = h[:24] + "..." + h[-12:]
        return f"Scalar({h}, prec={self._prec})"


# -- exact structural helpers (results may grow precision to stay exact) -------

def exact_add(a: Scalar, b: Scalar) -> Scalar:
    v = mpf_add(a._v, b._v, 0)
    prec = max(a._prec, b._prec, v[1].bit_length())
    return Scalar._raw(v, prec)


def exact_sub(a: Scalar, b: Scalar) -> Scalar:
    v = mpf_sub(a._v, b._v, 0)
    prec = max(a._prec, b._prec, v[1].bit_length())
    return Scalar._raw(v, prec)


def exact_mul_int(a: Scalar, n: int) -> Scalar:
    v = mpf_mul(a._v, from_int(n), 0)
    prec = max(a._prec, v[1].bit_length())
    return Scalar._raw(v, prec)


def scalar_max(*vals: Scalar) -> Scalar:
    m = vals[0]
    for v in vals[1:]:
        if v > m:
            m = v
    return m


def scalar_min(*vals: Scalar) -> Scalar:
    m = vals[0]
    for v in vals[1:]:
        if v < m:
            m = v
    return m
