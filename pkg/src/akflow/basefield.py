"""The base vector field on the half-line and its bump-function kit.

The field is negative on (0, oo), equals -1 above 1, and on each dyadic block
[2^-n-1, 2^-n] interpolates between three speed plateaus: a slow highland at
speed u_n = 2^-n^4 near the right edge, a fast central lowland at speed
v_n = 2^-n^2 on the middle third, and the next highland u_{n+1} at the left
edge.  Transitions are smooth steps.  All plateau values and breakpoints are
exact rationals, which downstream modules rely on for closed-form travel times.

Concrete bump choices:
    e(x)    = exp(-1/x) for x > 0, else 0
    s(x)    = e(x) / (e(x) + e(1-x))        step: 0 below 0, 1 above 1
    alpha(x) = s(6x - 1)                     0 below 1/6, 1 above 1/3
    beta(x)  = s(6x - 1) * s(5 - 6x)         support (1/6, 5/6), 1 on [1/3, 2/3]
    chi(t)   = s(5/4 - 5|t|)                 1 for |t| <= 1/20, 0 for |t| >= 1/4
    gamma(t) = (t^2/2) * chi(t)              exactly t^2/2 on |t| <= 1/20
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .jets import Jet, compose_affine, constant_jet, jet_exp
from .scalar import Scalar

GAMMA_CORE = Fraction(1, 20)      # gamma is exactly t^2/2 inside this radius
GAMMA_SUPPORT = Fraction(1, 4)    # gamma vanishes outside this radius
NORM_GRID = 1 << 12               # sampling grid size for measured suprema
NORM_SAFETY = 2


def _zero_jet(x: Scalar, order: int) -> Jet:
    return constant_jet(x, Scalar.zero(x.precision_bits), order)


def _one_jet(x: Scalar, order: int) -> Jet:
    return constant_jet(x, Scalar.one(x.precision_bits), order)


def flat_exp_jet(x: Scalar, order: int) -> Jet:
    """Jet of e(x) = exp(-1/x) (x > 0), identically 0 for x <= 0."""
    if x.sign <= 0:
        return _zero_jet(x, order)
    prec = x.precision_bits
    inv = Scalar.one(prec) / x
    coeffs = [-inv]
    p = inv
    fact = 1
    for m in range(1, order + 1):
        p = p * inv
        fact *= m
        c = p * fact
        coeffs.append(c if m % 2 == 1 else -c)
    return jet_exp(Jet(x, coeffs))


def step_jet(x: Scalar, order: int) -> Jet:
    """Jet of the smooth step s: exactly 0 for x <= 0 and 1 for x >= 1."""
    if x.sign <= 0:
        return _zero_jet(x, order)
    if x >= 1:
        return _one_jet(x, order)
    one = Scalar.one(x.precision_bits)
    if order == 0:
        # s = e(x)/(e(x)+e(1-x)) = 1/(1 + exp(1/x - 1/(1-x))); one
        # exponential instead of two, which dominates quadrature cost
        ratio = (one / x - one / (one - x)).exp()
        return Jet(x, (one / (one + ratio),))
    e1 = flat_exp_jet(x, order)
    e2_at = flat_exp_jet(one - x, order)
    e2 = compose_affine(e2_at, -1, x)
    return e1 / (e1 + e2)


def alpha_jet(x: Scalar, order: int) -> Jet:
    prec = x.precision_bits
    z = Scalar.from_int(6, prec) * x - 1
    return compose_affine(step_jet(z, order), 6, x)


def beta_jet(x: Scalar, order: int) -> Jet:
    prec = x.precision_bits
    up = compose_affine(step_jet(Scalar.from_int(6, prec) * x - 1, order), 6, x)
    down = compose_affine(step_jet(Scalar.from_int(5, prec) - 6 * x, order), -6, x)
    return up * down


def cutoff_jet(t: Scalar, order: int) -> Jet:
    """Jet of chi(t) = s(5/4 - 5|t|): 1 on |t| <= 1/20, 0 outside |t| >= 1/4."""
    a = abs(t)
    if a.cmp_fraction(GAMMA_CORE) <= 0:
        return _one_jet(t, order)
    if a.cmp_fraction(GAMMA_SUPPORT) >= 0:
        return _zero_jet(t, order)
    prec = t.precision_bits
    z = Scalar.from_fraction(Fraction(5, 4), prec) - 5 * a
    slope = -5 if t.sign > 0 else 5
    return compose_affine(step_jet(z, order), slope, t)


def parabola_jet(t: Scalar, order: int) -> Jet:
    prec = t.precision_bits
    half = Scalar.pow2(-1, prec)
    coeffs = [half * t * t, t, Scalar.one(prec)][: order + 1]
    coeffs += [Scalar.zero(prec)] * (order + 1 - len(coeffs))
    return Jet(t, coeffs)


def gamma_profile_jet(t: Scalar, order: int) -> Jet:
    """Jet of gamma(t) = (t^2/2) chi(t): the deformation profile.

    Exactly the parabola t^2/2 on |t| <= 1/20 (so D^2 gamma(0) = 1 exactly) and
    exactly 0 outside |t| <= 1/4.
    """
    a = abs(t)
    if a.cmp_fraction(GAMMA_SUPPORT) >= 0:
        return _zero_jet(t, order)
    if a.cmp_fraction(GAMMA_CORE) <= 0:
        return parabola_jet(t, order)
    return parabola_jet(t, order) * cutoff_jet(t, order)


def bump_jet(which: str, x: Scalar, order: int) -> Jet:
    """Jet of the named bump (alpha, beta or gamma) at x."""
    if order > 12:
        raise ValueError("order above jet contract bound")
    if which == "alpha":
        return alpha_jet(x, order)
    if which == "beta":
        return beta_jet(x, order)
    if which == "gamma":
        return gamma_profile_jet(x, order)
    raise ValueError(f"unknown bump {which!r}")


# -- the field landscape -----------------------------------------------------

@dataclass(frozen=True)
class FieldRegion:
    """One sub-block of constant or monotone speed.

    On plateaus |field| = speed exactly.  On transitions
    |field|(x) = lo_speed + (hi_speed - lo_speed) * s(zeta_scale*x + zeta_shift),
    where s is the smooth step and zeta increases toward the hi_speed end.
    """

    n: int
    kind: str                    # "plateau" | "transition"
    x_lo: Fraction
    x_hi: Fraction
    speed: Fraction | None = None
    lo_speed: Fraction | None = None
    hi_speed: Fraction | None = None
    zeta_scale: int | None = None
    zeta_shift: int | None = None

    @property
    def width(self) -> Fraction:
        return self.x_hi - self.x_lo


def u_value(n: int) -> Fraction:
    return Fraction(1, 2 ** (n ** 4))


def v_value(n: int) -> Fraction:
    return Fraction(1, 2 ** (n ** 2))


def w_value(n: int) -> Fraction:
    return Fraction(1, 2 ** (n ** 3))


class SergeraertField:
    """Jet evaluator and region map for the stock base field."""

    # y-breakpoints of one block, scaled by 2^-n-1 into x
    BREAKS = (Fraction(1), Fraction(7, 6), Fraction(4, 3),
              Fraction(5, 3), Fraction(11, 6), Fraction(2))

    def u(self, n: int, prec: int) -> Scalar:
        return Scalar.pow2(-(n ** 4), prec)

    def v(self, n: int, prec: int) -> Scalar:
        return Scalar.pow2(-(n ** 2), prec)

    def w(self, n: int, prec: int) -> Scalar:
        return Scalar.pow2(-(n ** 3), prec)

    def block_of(self, x: Scalar) -> int:
        """n with 2^-n-1 <= x < 2^-n (x in (0,1); boundary goes to block n-1)."""
        if x.sign <= 0 or x.cmp_fraction(Fraction(1)) >= 0:
            raise ValueError("block lookup needs 0 < x < 1")
        f = -(x.exponent + x.mantissa.bit_length() - 1) - 1
        return f

    def regions(self, n: int) -> tuple[FieldRegion, ...]:
        """The five sub-blocks of [2^-n-1, 2^-n], left to right."""
        s = Fraction(1, 2 ** (n + 1))
        b = [s * y for y in self.BREAKS]
        un, un1, vn = u_value(n), u_value(n + 1), v_value(n)
        scale = 6 * 2 ** (n + 1)
        return (
            FieldRegion(n, "plateau", b[0], b[1], speed=un1),
            FieldRegion(n, "transition", b[1], b[2], lo_speed=un1, hi_speed=vn,
                        zeta_scale=scale, zeta_shift=-7),
            FieldRegion(n, "plateau", b[2], b[3], speed=vn),
            FieldRegion(n, "transition", b[3], b[4], lo_speed=un, hi_speed=vn,
                        zeta_scale=-scale, zeta_shift=11),
            FieldRegion(n, "plateau", b[4], b[5], speed=un),
        )

    def region_at(self, x: Scalar) -> FieldRegion:
        n = self.block_of(x)
        for r in self.regions(n):
            if x.cmp_fraction(r.x_hi) <= 0:
                return r
        raise AssertionError("region bisection failure")

    def xi0_jet(self, x: Scalar, order: int) -> Jet:
        """Jet of the field at x >= 0 (zero jet at the origin by flatness)."""
        if order > 12:
            raise ValueError("order above jet contract bound")
        if x.sign < 0:
            raise ValueError("field domain is the closed half-line")
        prec = x.precision_bits
        if x.is_zero:
            return _zero_jet(x, order)
        if x.cmp_fraction(Fraction(1)) >= 0:
            return constant_jet(x, -Scalar.one(prec), order)
        n = self.block_of(x)
        un, un1, vn = self.u(n, prec), self.u(n + 1, prec), self.v(n, prec)
        y = (x.shift(n + 1) - 1).with_precision(prec)
        a = compose_affine(alpha_jet(y, order), Scalar.pow2(n + 1, prec), x)
        b = compose_affine(beta_jet(y, order), Scalar.pow2(n + 1, prec), x)
        return -(a * (un - un1) + b * (vn - un) + un1)

    def xi0_value(self, x: Scalar) -> Scalar:
        return self.xi0_jet(x, 0).value


def xi0_jet(x: Scalar, order: int) -> Jet:
    return SergeraertField().xi0_jet(x, order)


# -- measured norm constants ---------------------------------------------------

def sampled_sup_table(jet_fn, lo: Fraction, hi: Fraction, order: int,
                      prec: int, grid: int = NORM_GRID) -> list[Scalar]:
    """Per-order sampled suprema of |D^m f| over [lo, hi] on a uniform grid."""
    sups = [Scalar.zero(prec) for _ in range(order + 1)]
    for i in range(grid + 1):
        xf = lo + (hi - lo) * Fraction(i, grid)
        j = jet_fn(Scalar.from_fraction(xf, prec), order)
        for m in range(order + 1):
            a = abs(j.D(m))
            if a > sups[m]:
                sups[m] = a
    return sups


def gamma_norm_table(order: int, prec: int = 192,
                     grid: int = NORM_GRID) -> list[Scalar]:
    """Cumulative norms of the deformation profile: entry m is
    max over m' <= m of (safety * sampled sup |D^m' gamma|)."""
    sups = sampled_sup_table(gamma_profile_jet, -GAMMA_SUPPORT, GAMMA_SUPPORT,
                             order, prec, grid)
    out = []
    cur = Scalar.zero(prec)
    for m in range(order + 1):
        scaled = sups[m] * NORM_SAFETY
        if scaled > cur:
            cur = scaled
        out.append(cur)
    return out


def xi0_c1_bound(prec: int = 192, grid: int = 1 << 10,
                 blocks: int = 5) -> Scalar:
    """Measured C1 norm bound of the field: max(sup|field|, safety * sup|D field|).

    sup|field| = 1 exactly (value on [1, oo)).  The derivative sup lives in the
    first few transition sub-blocks; amplitudes decay like the lowland speed, so
    sampling blocks 0..blocks-1 covers the true sup with margin.
    """
    field = SergeraertField()
    top = Scalar.one(prec)
    for n in range(blocks):
        for r in field.regions(n):
            if r.kind != "transition":
                continue
            sups = sampled_sup_table(field.xi0_jet, r.x_lo, r.x_hi, 1, prec, grid)
            d = sups[1] * NORM_SAFETY
            if d > top:
                top = d
    return top


# -- base-field oracle protocol ---------------------------------------------------

class ExpFieldOracle:
    """Closed-form oracle for the field -x (time-1 map multiplies by e^-1).

    Not flat at the origin; used to exercise the oscillation statistic's
    failure path.
    """

    flat_at_origin = False

    def __init__(self, prec: int = 256):
        self.prec = prec

    def field_jet(self, x: Scalar, order: int) -> Jet:
        prec = x.precision_bits
        coeffs = [-x, -Scalar.one(prec)] + [Scalar.zero(prec)] * max(0, order - 1)
        return Jet(x, coeffs[: order + 1])

    def travel_time(self, x: Scalar) -> Scalar:
        if x.sign <= 0:
            raise ValueError("positive positions only")
        return -x.log()

    def point_at_time(self, t: Scalar) -> Scalar:
        return (-t).exp()

    def c1_bound(self) -> Scalar:
        return Scalar.from_int(2, self.prec)


def oscillation_statistic(oracle, x: Scalar, octaves: int = 3,
                          per_octave: int = 16, stat_prec: int = 256,
                          floor: Scalar | None = None) -> Scalar:
    """sup over sampled y in (0, x] of |log(x - f0(x))| / |log(y - f0(y))|.

    f0 is the oracle's time-1 map, evaluated as point_at_time(travel_time + 1).
    The grid is geometric: per_octave points per octave below x, over the given
    number of octaves; samples below `floor` are dropped, which lets a caller
    keep the sweep inside the oracle's tabulated range.  The statistic diverges
    with depth exactly when the field has ever-slower plateaus against which
    faster stretches look singular.
    """
    def displacement(y: Scalar) -> Scalar:
        fy = oracle.point_at_time(oracle.travel_time(y) + 1)
        d = y - fy
        if d.sign <= 0:
            raise ValueError("oracle map is not contracting at the sample")
        return d

    num = abs(displacement(x).log()).with_precision(stat_prec)
    best = Scalar.one(stat_prec)   # y = x gives ratio 1
    logx = x.with_precision(stat_prec).log()
    step = Scalar.from_int(2, stat_prec).log() / per_octave
    for i in range(1, octaves * per_octave + 1):
        y = (logx - step * i).exp()
        if floor is not None and y < floor:
            break
        den = abs(displacement(y).log()).with_precision(stat_prec)
        if den.is_zero:
            continue
        r = num / den
        if r > best:
            best = r
    return best
