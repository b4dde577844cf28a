"""Truncated jets: a base point plus raw derivatives D^0..D^m.

The algebra (product, quotient, exponential, composition, inversion) is carried
out on Taylor coefficients internally and converted back to raw derivatives, so
callers never handle factorial conventions.  Composition requires the outer base
point to equal the inner jet's value bit-for-bit; this is an interface contract,
not a tolerance, and internal callers arrange it by construction.

Orders are small (contract bound 12), so the O(m^3) Horner composition and the
Newton series reversion are nowhere near a bottleneck.
"""

from __future__ import annotations

from math import factorial

from .scalar import Scalar

MAX_ORDER = 12


class Jet:
    """Raw derivatives of a function at a point: coeffs[i] = D^i g(base)."""

    __slots__ = ("base", "coeffs")

    def __init__(self, base: Scalar, coeffs):
        if not isinstance(base, Scalar):
            raise TypeError("jet base must be a Scalar")
        coeffs = tuple(coeffs)
        if not coeffs:
            raise ValueError("jet needs at least the order-0 coefficient")
        if len(coeffs) - 1 > MAX_ORDER:
            raise ValueError(f"jet order above {MAX_ORDER}")
        if not all(isinstance(c, Scalar) for c in coeffs):
            raise TypeError("jet coefficients must be Scalars")
        self.base = base
        self.coeffs = coeffs

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def value(self) -> Scalar:
        return self.coeffs[0]

    def D(self, i: int) -> Scalar:
        return self.coeffs[i]

    @property
    def precision_bits(self) -> int:
        return max(c.precision_bits for c in self.coeffs)

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        return Jet(self.base, self.coeffs[: order + 1])

    def __repr__(self):
        cs = ", ".join(repr(float(c)) for c in self.coeffs)
        return f"Jet(base={float(self.base)!r}, D=[{cs}])"

    # -- linear operations --------------------------------------------------

    def _check_base(self, other: "Jet"):
        if not (self.base == other.base):
            raise ValueError("jet bases differ")

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check_base(other)
            n = min(self.order, other.order)
            return Jet(self.base, tuple(self.coeffs[i] + other.coeffs[i]
                                        for i in range(n + 1)))
        if isinstance(other, (Scalar, int)):
            return Jet(self.base, (self.coeffs[0] + other,) + self.coeffs[1:])
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            self._check_base(other)
            n = min(self.order, other.order)
            return Jet(self.base, tuple(self.coeffs[i] - other.coeffs[i]
                                        for i in range(n + 1)))
        if isinstance(other, (Scalar, int)):
            return Jet(self.base, (self.coeffs[0] - other,) + self.coeffs[1:])
        return NotImplemented

    def __neg__(self):
        return Jet(self.base, tuple(-c for c in self.coeffs))

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check_base(other)
            n = min(self.order, other.order)
            out = []
            for k in range(n + 1):
                acc = Scalar.zero(self.coeffs[0].precision_bits)
                for i in range(k + 1):
                    acc = acc + _binom(k, i) * (self.coeffs[i] * other.coeffs[k - i])
                out.append(acc)
            return Jet(self.base, out)
        if isinstance(other, (Scalar, int)):
            return Jet(self.base, tuple(c * other for c in self.coeffs))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            self._check_base(other)
            if other.value.is_zero:
                raise ZeroDivisionError("jet division by zero value")
            n = min(self.order, other.order)
            num = _taylor(self.coeffs[: n + 1])
            den = _taylor(other.coeffs[: n + 1])
            return Jet(self.base, _raw(_sdiv(num, den)))
        if isinstance(other, (Scalar, int)):
            return Jet(self.base, tuple(c / other for c in self.coeffs))
        return NotImplemented


def constant_jet(base: Scalar, value: Scalar, order: int) -> Jet:
    zero = Scalar.zero(value.precision_bits)
    return Jet(base, (value,) + (zero,) * order)


def identity_jet(base: Scalar, order: int, precision_bits: int | None = None) -> Jet:
    prec = precision_bits or base.precision_bits
    one = Scalar.one(prec)
    zero = Scalar.zero(prec)
    coeffs = (base, one) + (zero,) * (order - 1) if order >= 1 else (base,)
    return Jet(base, coeffs)


def jet_exp(j: Jet) -> Jet:
    """Jet of exp(g) from the jet of g.  One scalar exponential."""
    a = _taylor(j.coeffs)
    e0 = j.value.exp()
    n = len(a) - 1
    out = [e0]
    for k in range(1, n + 1):
        acc = Scalar.zero(e0.precision_bits)
        for i in range(1, k + 1):
            acc = acc + (i * a[i]) * out[k - i]
        out.append(acc / k)
    return Jet(j.base, _raw(out))


def jet_reciprocal(j: Jet) -> Jet:
    one = constant_jet(j.base, Scalar.one(j.precision_bits), j.order)
    return one / j


def jet_compose(outer: Jet, inner: Jet) -> Jet:
    """Jet of g(f(x)) at inner.base.  Requires outer.base == inner.value exactly."""
    if not (outer.base == inner.value):
        raise ValueError("outer jet base does not match inner jet value")
    n = min(outer.order, inner.order)
    o = _taylor(outer.coeffs[: n + 1])
    i = _taylor(inner.coeffs[: n + 1])
    i0 = [Scalar.zero(inner.precision_bits)] + i[1:]
    r = _scompose(o, i0)
    r[0] = outer.value
    return Jet(inner.base, _raw(r))


def compose_affine(outer: Jet, slope, new_base: Scalar) -> Jet:
    """Jet at new_base of x -> g(c + slope*(x - new_base)), c = outer.base.

    The i-th derivative picks up slope**i.  Used for exact reparametrizations
    (integer and power-of-two slopes stay exact up to final rounding).
    """
    out = list(outer.coeffs)
    s = slope if isinstance(slope, Scalar) else Scalar.from_int(slope, outer.precision_bits)
    p = Scalar.one(s.precision_bits)
    for i in range(1, len(out)):
        p = p * s
        out[i] = out[i] * p
    return Jet(new_base, out)


def jet_invert(j: Jet) -> Jet:
    """Jet of the local inverse at j.value.  Requires D^1 != 0.

    Newton series reversion: H <- H - (A(H) - id)/(A'(H)), which doubles the
    correct order each pass.
    """
    if j.order < 1:
        raise ValueError("inversion needs order >= 1")
    if j.D(1).is_zero:
        raise ZeroDivisionError("first derivative vanishes; no local inverse")
    n = j.order
    prec = j.precision_bits
    zero, one = Scalar.zero(prec), Scalar.one(prec)
    a = _taylor(j.coeffs)
    a[0] = zero
    da = [(k + 1) * a[k + 1] for k in range(n)]

    h = [zero, one / a[1]] + [zero] * (n - 1)
    passes = max(1, (n - 1).bit_length()) + 1
    ident = [zero, one] + [zero] * (n - 1)
    for _ in range(passes):
        ah = _scompose(a, h)
        err = [ah[i] - ident[i] for i in range(n + 1)]
        dah = _scompose(da, h)
        corr = _sdiv(err, dah)
        h = [h[i] - corr[i] for i in range(n + 1)]
    inv = _raw(h)
    return Jet(j.value, (j.base,) + tuple(inv[1:]))


def derivative_jet(j: Jet) -> Jet:
    """Jet of Dg at the same base (order drops by one)."""
    if j.order < 1:
        raise ValueError("order too low to differentiate")
    return Jet(j.base, j.coeffs[1:])


def jet_log_derivative(j: Jet) -> Scalar:
    """D^2 g / D g at the base point (the nonlinearity of g there)."""
    return j.D(2) / j.D(1)


_BELL_CACHE = [1, 1]


def bell_number(m: int) -> int:
    """Number of set partitions of m elements (B_0 = 1)."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    while len(_BELL_CACHE) <= m:
        n = len(_BELL_CACHE) - 1
        nxt = sum(_binom_int(n, k) * _BELL_CACHE[k] for k in range(n + 1))
        _BELL_CACHE.append(nxt)
    return _BELL_CACHE[m]


# -- internal truncated power series (lists of Taylor coefficients) ----------

def _binom_int(n: int, k: int) -> int:
    return factorial(n) // (factorial(k) * factorial(n - k))

_BINOM = [[_binom_int(n, k) for k in range(n + 1)] for n in range(MAX_ORDER + 1)]


def _binom(n: int, k: int) -> int:
    return _BINOM[n][k]


def _taylor(coeffs):
    return [c / factorial(i) if i > 1 else c for i, c in enumerate(coeffs)]


def _raw(coeffs):
    return [c * factorial(i) if i > 1 else c for i, c in enumerate(coeffs)]


def _smul(a, b):
    n = len(a) - 1
    prec = max(c.precision_bits for c in a)
    out = []
    for k in range(n + 1):
        acc = Scalar.zero(prec)
        for i in range(k + 1):
            if i < len(a) and k - i < len(b):
                acc = acc + a[i] * b[k - i]
        out.append(acc)
    return out


def _sdiv(a, b):
    n = len(a) - 1
    if b[0].is_zero:
        raise ZeroDivisionError("series division by zero constant term")
    out = []
    for k in range(n + 1):
        acc = a[k]
        for i in range(k):
            acc = acc - out[i] * b[k - i]
        out.append(acc / b[0])
    return out


def _scompose(outer, inner):
    """outer(inner(s)) truncated; inner must have zero constant term."""
    n = len(inner) - 1
    prec = max(c.precision_bits for c in inner)
    zero = Scalar.zero(prec)
    r = [outer[-1]] + [zero] * n
    for i in range(len(outer) - 2, -1, -1):
        r = _smul(r, inner)
        r[0] = r[0] + outer[i]
    return r[: n + 1]
