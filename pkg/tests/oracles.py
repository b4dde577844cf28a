"""Independent oracles used to freeze expected values.

Everything here works in exact rational arithmetic (fractions.Fraction) or with
plain integer combinatorics, so it shares no code with the package's scalar or
jet engines.
"""

from fractions import Fraction
from itertools import product
from math import factorial


# -- exact polynomial arithmetic ------------------------------------------------

def poly_mul(p, q):
    r = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                r[i + j] += a * b
    return r


def poly_compose(outer, inner, degree):
    """Coefficients of outer(inner(s)) truncated at the given degree."""
    out = [Fraction(0)] * (degree + 1)
    power = [Fraction(1)]
    for k, c in enumerate(outer):
        if k > 0:
            power = poly_mul(power, inner)[: degree + 1]
        for i, a in enumerate(power[: degree + 1]):
            out[i] += c * a
    return out


def taylor_from_derivs(derivs):
    return [Fraction(d) / factorial(i) for i, d in enumerate(derivs)]


def derivs_from_taylor(coeffs):
    return [c * factorial(i) for i, c in enumerate(coeffs)]


def compose_derivatives(outer_derivs, inner_derivs):
    """Faa di Bruno oracle: raw derivatives of g(f(x)) at a point.

    outer_derivs: D^0..D^m of g at f(x0); inner_derivs: D^0..D^m of f at x0.
    Computed by exact truncated polynomial composition, no Bell polynomials.
    """
    m = len(outer_derivs) - 1
    P = taylor_from_derivs(outer_derivs)
    Q = taylor_from_derivs(inner_derivs)
    Q0 = [Fraction(0)] + Q[1:]
    R = poly_compose(P, Q0, m)
    return derivs_from_taylor(R)


def invert_derivatives(derivs):
    """Raw derivatives at f(x0) of the local inverse, by triangular solve.

    Index 0 of the result is a placeholder zero (the inverse's value is the
    original base point, which the caller knows).
    """
    m = len(derivs) - 1
    a = taylor_from_derivs(derivs)
    if a[1] == 0:
        raise ZeroDivisionError("first derivative vanishes")
    b = [Fraction(0)] * (m + 1)
    b[1] = 1 / a[1]
    for k in range(2, m + 1):
        partial = [Fraction(0)] + b[1:k] + [Fraction(0)] * (m - k + 1)
        c = poly_compose([Fraction(0)] + a[1:], partial, k)
        b[k] = -c[k] / a[1]
    return derivs_from_taylor(b)


# -- combinatorics ----------------------------------------------------------------

def bell_by_enumeration(m):
    """Set partitions of {1..m} counted via restricted growth strings."""
    if m == 0:
        return 1
    count = 0
    for word in product(range(m), repeat=m - 1):
        top = 0
        good = True
        for w in word:
            if w > top + 1:
                good = False
                break
            top = max(top, w)
        if good:
            count += 1
    return count


def bell_triangle(m):
    """Bell numbers B_1..B_m via the Bell triangle recurrence."""
    vals = []
    row = [1]
    for _ in range(m):
        vals.append(row[-1])
        new = [row[-1]]
        for x in row:
            new.append(new[-1] + x)
        row = new
    return vals


def exp_fraction(x: Fraction, terms: int = 220) -> Fraction:
    """Partial sum of the exponential series in exact rational arithmetic."""
    s = Fraction(0)
    t = Fraction(1)
    for k in range(1, terms + 1):
        s += t
        t = t * x / k
    return s


def nearest_dyadic(f: Fraction, prec: int) -> Fraction:
    """Round a rational to a prec-bit dyadic, ties to even mantissa."""
    if f == 0:
        return Fraction(0)
    neg = f < 0
    f = abs(f)
    e = 0
    while f >= 1:
        f /= 2
        e += 1
    while f < Fraction(1, 2):
        f *= 2
        e -= 1
    scaled = f * (1 << prec)
    man = scaled.numerator // scaled.denominator
    rem = scaled - man
    if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and man % 2 == 1):
        man += 1
    out = Fraction(man, 1 << prec) * Fraction(2) ** e
    return -out if neg else out
