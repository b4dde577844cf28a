"""Wave reparametrizations of the travel chart and the flows they generate.

Each stage adds one periodic train of localized bumps to the chart: q
translates per unit of chart time, common amplitude w drawn from one block of
the speed ladder, phased so the train is exactly tangent to the identity at
every integer and inactive past the marked chart time j.  Finite compositions
of these maps, conjugated through the chart, yield flows that stay close to
the base flow at scheduled times while their half-time map accumulates
unbounded second-order nonlinearity at the marked slow points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .basefield import (
    GAMMA_SUPPORT,
    NORM_SAFETY,
    gamma_norm_table,
    gamma_profile_jet,
    u_value,
    v_value,
    w_value,
    xi0_c1_bound,
)
from .cantor import GridMissError, IntervalSet, rationals, refine_Ik, select_Tk
from .jets import (
    Jet,
    bell_number,
    compose_affine,
    derivative_jet,
    identity_jet,
    jet_compose,
    jet_invert,
    jet_log_derivative,
    jet_reciprocal,
)
from .scalar import Scalar, exact_sub, scalar_max
from .timechart import OrbitWindow, SergeraertOracle, TravelTable, search_orbit_indices_general


class InversionError(ArithmeticError):
    """Newton solve for a wave-map preimage failed to reach tolerance."""


class DualRouteError(ArithmeticError):
    """The conjugation route and the explicit displacement route disagree."""


class DepthExhaustedError(ArithmeticError):
    """No admissible stage parameters inside the configured horizon."""


# -- stage data ---------------------------------------------------------------


@dataclass(frozen=True)
class WavePlan:
    """Parameters of one deformation stage.

    q: translates per unit chart time (odd, so half-integers stay fixed).
    n: block of the speed ladder supplying the amplitude; in general mode the
       ordinal of the certified window instead.
    i: integer chart time on the slow plateau probed by the blow-up checks.
    j: integer chart time where the train's leading translate sits.
    w: bump amplitude.  u, v: slow and fast speeds at the stage's windows.
    r: rational time excluded from the schedule at this stage.
    """

    k: int
    q: int
    n: int
    i: int
    j: int
    w: Scalar
    u: Scalar
    v: Scalar
    r: Fraction
    grid_times: tuple[Fraction, ...]
    u_exact: Optional[Fraction] = None
    v_exact: Optional[Fraction] = None
    w_exact: Optional[Fraction] = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("stage index starts at 1")
        if self.q < 3 or self.q % 2 == 0:
            raise ValueError("wave count must be odd and at least 3")
        if not 0 < self.i < self.j:
            raise ValueError("window times must satisfy 0 < i < j")
        if self.w.sign <= 0:
            raise ValueError("amplitude must be positive")

    @property
    def support_interval(self) -> tuple[Fraction, Fraction]:
        """Chart window J holding the leading translate."""
        h = Fraction(1, 2 * self.q)
        return (self.j - h, self.j + h)

    @property
    def travel_interval(self) -> tuple[Fraction, Fraction]:
        """Chart window M swept by one full unit of flow time across J."""
        h = Fraction(1, 2 * self.q)
        return (self.j - 1 + h, self.j + h)


@dataclass(frozen=True, eq=False)
class ConjugationStack:
    """Finite composition of stage waves plus the schedule that chose them."""

    table: Optional[TravelTable]
    mode: str
    plans: tuple[WavePlan, ...]
    intervals: tuple[IntervalSet, ...]
    measured: tuple[dict, ...]

    def __post_init__(self):
        if self.mode not in ("sergeraert", "general"):
            raise ValueError(f"unknown mode {self.mode!r}")
        qs = [p.q for p in self.plans]
        if any(b <= a for a, b in zip(qs, qs[1:])):
            raise ValueError("wave counts must increase")
        ns = [p.n for p in self.plans]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("stage depths must increase")

    @property
    def K(self) -> int:
        return len(self.plans)

    @property
    def precision_bits(self) -> int:
        if self.table is not None:
            return self.table.precision_bits
        return self.plans[0].w.precision_bits if self.plans else Scalar.one().precision_bits

    @property
    def field(self):
        return self.table.field if self.table is not None else None


# -- single-stage wave maps ----------------------------------------------------


def _wave_phase(plan: WavePlan, t: Scalar, anchor: int) -> Optional[Fraction]:
    """Exact offset inside the covering bump at chart time anchor + t.

    The train has one translate per 1/q step ending at the marked time j and
    extending through every earlier step, so at most one bump covers any
    point; translations by grid fractions then match phases exactly, which
    is what confines the flow deformation to the final period.  Returns the
    profile coordinate z with |z| < 1/4, or None when every translate misses.
    """
    z0 = plan.q * (t.as_fraction() + (anchor - plan.j))
    p = math.floor(Fraction(1, 2) - z0)
    if p < 0:
        return None
    z = z0 + p
    if z >= GAMMA_SUPPORT or z <= -GAMMA_SUPPORT:
        return None
    return z


def phi_jet(plan: WavePlan, t: Scalar, order: int, anchor: int = 0) -> Jet:
    """Jet at t of the stage wave map, in coordinates offset by anchor.

    Evaluates delta -> phi(anchor + delta) - anchor; anchor = 0 gives the map
    itself.  A nonzero integer anchor keeps mantissas small when sweeping
    windows near astronomically large chart times at reduced precision.
    Integer points are exact: the profile and its slope vanish there.
    """
    z = _wave_phase(plan, t, anchor)
    base = identity_jet(t, order)
    if z is None:
        return base
    prec = t.precision_bits
    g = gamma_profile_jet(Scalar.from_fraction(z, prec), order)
    return base + compose_affine(g, plan.q, t) * plan.w.with_precision(prec)


def phi_inverse_value(plan: WavePlan, y: Scalar, anchor: int = 0,
                      max_iter: int = 64) -> Scalar:
    """Newton preimage of y under the stage wave map.

    The residual is assembled as exact(s - y) + w*profile so that the huge
    common part of s and y cancels without rounding; tolerance is relative,
    64 ulps at the working precision.
    """
    prec = y.precision_bits
    w = plan.w.with_precision(prec)
    tol = Scalar.pow2(-prec + 64, prec) * scalar_max(Scalar.one(prec), abs(y))
    s = y
    for _ in range(max_iter):
        z = _wave_phase(plan, s, anchor)
        if z is None:
            resid = exact_sub(s, y)
            deriv = Scalar.one(prec)
        else:
            g = gamma_profile_jet(Scalar.from_fraction(z, prec), 1)
            resid = exact_sub(s, y) + w * g.value
            deriv = Scalar.one(prec) + w * g.D(1) * plan.q
        if abs(resid) <= tol:
            return s
        s = s - resid / deriv
    raise InversionError(
        f"wave preimage did not converge in {max_iter} steps (stage {plan.k})")


def phi_inverse_jet(plan: WavePlan, y: Scalar, order: int, anchor: int = 0) -> Jet:
    """Jet at y of the inverse stage wave map (Newton value, then series
    reversion of the forward jet, rebased at y)."""
    s = phi_inverse_value(plan, y, anchor)
    if order == 0:
        return Jet(y, (s,))
    inv = jet_invert(phi_jet(plan, s, order, anchor))
    return Jet(y, (s,) + tuple(inv.coeffs[1:]))


# -- composed stack maps ---------------------------------------------------------


def _upto(stack: ConjugationStack, k: Optional[int]) -> tuple[WavePlan, ...]:
    kk = stack.K if k is None else k
    if not 0 <= kk <= stack.K:
        raise ValueError(f"stage cut {kk} outside [0, {stack.K}]")
    return stack.plans[:kk]


def stack_jet(stack: ConjugationStack, t: Scalar, order: int,
              k: Optional[int] = None, anchor: int = 0) -> Jet:
    """Jet at t of the composition of the first k stage waves (first stage
    applied first), in anchor-offset coordinates."""
    cur: Optional[Jet] = None
    point = t
    for plan in _upto(stack, k):
        step = phi_jet(plan, point, order, anchor)
        cur = step if cur is None else jet_compose(step, cur)
        point = cur.value
    return identity_jet(t, order) if cur is None else cur


def stack_inverse_jet(stack: ConjugationStack, y: Scalar, order: int,
                      k: Optional[int] = None, anchor: int = 0) -> Jet:
    """Jet at y of the inverse composition (last stage peeled first)."""
    cur: Optional[Jet] = None
    point = y
    for plan in reversed(_upto(stack, k)):
        step = phi_inverse_jet(plan, point, order, anchor)
        cur = step if cur is None else jet_compose(step, cur)
        point = cur.value
    return identity_jet(y, order) if cur is None else cur


def stack_log_derivative(stack: ConjugationStack, t: Scalar,
                         k: Optional[int] = None, anchor: int = 0) -> Scalar:
    """Nonlinearity D^2/D^1 of the composed wave map at t."""
    return jet_log_derivative(stack_jet(stack, t, 2, k, anchor))


# -- displaced wave maps at grid times -------------------------------------------


def sigma_jet(stack: ConjugationStack, k: int, p: int, t: Scalar, order: int,
              anchor: int = 0) -> Jet:
    """Jet at t of the stage-k wave map conjugating a p/q_k chart translation.

    Computed two ways for every call: through the conjugation
    (inverse wave) o (shift) o (wave), and through the closed displacement
    t + p/q + w * profile(z0 + m) with the single covering index m < p.  Both
    must agree to 64 ulps componentwise or the call refuses the result; the
    conjugation route is returned.
    """
    if not 1 <= k <= stack.K:
        raise ValueError(f"stage {k} outside [1, {stack.K}]")
    plan = stack.plans[k - 1]
    if not 0 <= p <= plan.q:
        raise ValueError(f"numerator {p} outside [0, {plan.q}]")
    if p == 0:
        return identity_jet(t, order)
    prec = t.precision_bits
    c = Scalar.from_fraction(Fraction(p, plan.q), prec)

    fwd = phi_jet(plan, t, order, anchor)
    shifted = Jet(t, (fwd.value + c,) + tuple(fwd.coeffs[1:]))
    conj = jet_compose(phi_inverse_jet(plan, shifted.value, order, anchor), shifted)

    ident = identity_jet(t, order)
    explicit = Jet(t, (ident.value + c,) + tuple(ident.coeffs[1:]))
    z0 = plan.q * (t.as_fraction() + (anchor - plan.j))
    m = math.floor(Fraction(1, 2) - z0)
    if 0 <= m <= p - 1 and -GAMMA_SUPPORT < z0 + m < GAMMA_SUPPORT:
        g = gamma_profile_jet(Scalar.from_fraction(z0 + m, prec), order)
        explicit = explicit + compose_affine(g, plan.q, t) * plan.w.with_precision(prec)

    # the Newton preimage is only accurate relative to |y|, and that error
    # reaches every coefficient of the conjugation route
    slack = Scalar.pow2(-prec + 80, prec) * scalar_max(Scalar.one(prec), abs(t))
    for mm in range(order + 1):
        a, b = conj.D(mm), explicit.D(mm)
        tol = slack * scalar_max(Scalar.one(prec), abs(a), abs(b))
        if abs(a - b) > tol:
            raise DualRouteError(
                f"stage {k} displacement routes differ at order {mm}: "
                f"{a!r} vs {b!r}")
    return conj


# -- flows and fields -------------------------------------------------------------


def flow_jet(stack: ConjugationStack, k: int, t, x: Scalar, order: int) -> Jet:
    """Jet at x of the stage-k flow for time t.

    Chain: chart in, forward waves, translate by t, inverse waves, chart out.
    k = 0 is the base flow.  t = 0 returns the identity without touching the
    chart.  Times are limited to [-2, 2]; positions must lie in the table's
    range.
    """
    if stack.table is None:
        raise ValueError("flow evaluation needs a chart-backed stack")
    prec = stack.precision_bits
    if isinstance(t, (int, Fraction)):
        t = Scalar.from_fraction(Fraction(t), prec)
    if t.cmp_fraction(Fraction(-2)) < 0 or t.cmp_fraction(Fraction(2)) > 0:
        raise ValueError("flow time limited to [-2, 2]")
    if not 0 <= k <= stack.K:
        raise ValueError(f"stage cut {k} outside [0, {stack.K}]")
    if t.is_zero:
        return identity_jet(x.with_precision(prec), order)
    table = stack.table
    tj = table.psi_inverse_jet(x, order)
    t = t.with_precision(prec)
    if k == 0:
        target = tj.value + t
        moved = Jet(tj.base, (target,) + tuple(tj.coeffs[1:]))
        return jet_compose(table.psi_jet(target, order), moved)
    # wave phases live at unit scale while travel times grow without bound,
    # so split off the integer part and run the wave chain in anchor-offset
    # coordinates; the offset stays exact through the translation, and the
    # anchor is only re-added for the final chart lookup, where the field's
    # slowness absorbs the rounding
    base_time = tj.value.floor()
    delta = exact_sub(tj.value, Scalar.from_int(base_time, prec))
    tj_off = Jet(tj.base, (delta.with_precision(prec),) + tuple(tj.coeffs[1:]))
    fw = stack_jet(stack, tj_off.value, order, k, anchor=base_time)
    comp = jet_compose(fw, tj_off)
    shifted = Jet(comp.base, (comp.value + t,) + tuple(comp.coeffs[1:]))
    back = jet_compose(
        stack_inverse_jet(stack, shifted.value, order, k, anchor=base_time),
        shifted)
    target = Scalar.from_int(base_time, prec) + back.value
    moved = Jet(back.base, (target,) + tuple(back.coeffs[1:]))
    return jet_compose(table.psi_jet(target, order), moved)


def xi_k_jet(stack: ConjugationStack, k: int, x: Scalar, order: int) -> Jet:
    """Jet at x of the stage-k field: the base field divided by the chart
    derivative of the composed waves along the travel time."""
    if stack.table is None:
        raise ValueError("field evaluation needs a chart-backed stack")
    base = stack.field.xi0_jet(x.with_precision(stack.precision_bits), order)
    if k == 0:
        return base
    tj = stack.table.psi_inverse_jet(x, order)
    dfw = derivative_jet(stack_jet(stack, tj.value, order + 1, k))
    return base / jet_compose(dfw, tj)


def nu_k_jet(stack: ConjugationStack, k: int, x: Scalar, order: int) -> Jet:
    """Jet at x of the stage-k field change alone: the base field times
    (1/(wave slope) - 1) read along the travel time.  Vanishes identically
    wherever the stage's train misses."""
    if stack.table is None:
        raise ValueError("field evaluation needs a chart-backed stack")
    if not 1 <= k <= stack.K:
        raise ValueError(f"stage {k} outside [1, {stack.K}]")
    prec = stack.precision_bits
    plan = stack.plans[k - 1]
    x = x.with_precision(prec)
    tj = stack.table.psi_inverse_jet(x, order)
    dphi = derivative_jet(phi_jet(plan, tj.value, order + 1))
    zeta = jet_reciprocal(dphi) + (-1)
    return stack.field.xi0_jet(x, order) * jet_compose(zeta, tj)


# -- stage selection ---------------------------------------------------------------


def choose_qk(prev: IntervalSet, q_prev: int, r: Fraction,
              q_cap: int = 1 << 20) -> int:
    """Smallest odd wave count above q_prev that the excluded rational's
    denominator does not divide and whose grid meets every scheduled component
    in at least two interior points."""
    q = max(3, q_prev + 2 if q_prev % 2 else q_prev + 1)
    if q % 2 == 0:
        q += 1
    while q <= q_cap:
        if q % r.denominator != 0:
            try:
                select_Tk(prev, q)
                return q
            except GridMissError:
                pass
        q += 2
    raise DepthExhaustedError(f"no admissible wave count at or below {q_cap}")


def stage_gamma_norm(w: Fraction, q: int, order: int,
                     gamma_norms: Sequence[Scalar]) -> Fraction:
    """Upper bound for the scaled profile's cumulative order-`order` norm.

    The profile table is cumulative and the per-order factor q^m grows with m,
    so the top order dominates.
    """
    return w * q ** order * gamma_norms[order].as_fraction()


def choose_nk(k: int, q: int, n_prev: int, n_max: int,
              gamma_norms: Sequence[Scalar], dphi_norm: Scalar,
              xi0_norm: Scalar) -> int:
    """Smallest admissible block index for stage k in plateau mode.

    Admissible means the scaled profile is small enough that one wave's
    contribution to every controlled estimate fits under 2^-k-4, with the
    composition growth, the partition count of the chain rule, and the base
    field's C1 size all priced in, and with the fast-speed powers reserved
    for the window rescaling.
    """
    g = gamma_norms[k + 1].as_fraction()
    d = dphi_norm.as_fraction()
    x1 = xi0_norm.as_fraction()
    bell = bell_number(k + 1)
    for n in range(max(4, n_prev + 1), n_max + 1):
        lhs = w_value(n) * q ** (k + 1) * g
        rhs = (Fraction(1, 2 ** (k + 4)) * v_value(n) ** (k - 1)
               / (bell * d ** (k + 1) * x1))
        if lhs <= rhs:
            return n
    raise DepthExhaustedError(
        f"stage {k}: no block index in ({n_prev}, {n_max}] passes the size gate")


# -- measured norms -----------------------------------------------------------------


def _offset_cells(plans: Sequence[WavePlan],
                  grid: int) -> list[tuple[int, Fraction, Fraction, int]]:
    """Structured sweep cells (anchor, lo, hi, points) in offset coordinates.

    One unit cell at anchor 0 covers a full period of every train with all
    stages active; per-stage zooms resolve each profile's own scale; cells at
    each stage's j catch the end of its train.
    """
    cells = [(0, Fraction(-1, 2), Fraction(1, 2), grid)]
    for plan in plans:
        s = GAMMA_SUPPORT / plan.q
        cells.append((0, -s, s, max(64, grid // 4)))
        cells.append((plan.j, Fraction(-3, 2), Fraction(3, 2), grid))
    return cells


def stack_derivative_sups(plans: Sequence[WavePlan], order: int, *,
                          prec: int = 320, grid: int = 1 << 10) -> list[Scalar]:
    """Sampled suprema of |D^m| of the composed waves, m = 0..order, over the
    structured cells.  Entry 0 is left at zero: the composition tracks the
    identity and its raw size carries no information."""
    sups = [Scalar.zero(prec) for _ in range(order + 1)]
    if not plans:
        sups[1] = Scalar.one(prec)
        return sups
    holder = ConjugationStack(table=None, mode="sergeraert", plans=tuple(plans),
                              intervals=(), measured=())
    for anchor, lo, hi, pts in _offset_cells(plans, grid):
        for idx in range(pts + 1):
            df = lo + (hi - lo) * Fraction(idx, pts)
            delta = Scalar.from_fraction(df, prec)
            jet = stack_jet(holder, delta, order, anchor=anchor)
            for m in range(1, order + 1):
                a = abs(jet.D(m))
                if a > sups[m]:
                    sups[m] = a
    return sups


def analytic_dphi_bound(plans: Sequence[WavePlan], k_order: int,
                        gamma_norms: Sequence[Scalar]) -> Fraction:
    """Coarse a priori bound for sup over 1 <= m <= k_order+1 of |D^m| of the
    composed waves, via the chain-rule partition count applied stage by
    stage.  Used as a cross-check ceiling for the sampled value."""
    bell = Fraction(bell_number(k_order + 1))
    bound = Fraction(1)
    for plan in plans:
        g = stage_gamma_norm(plan.w.as_fraction(), plan.q, k_order + 1, gamma_norms)
        bound = bell * (1 + g) * max(Fraction(1), bound) ** (k_order + 1)
    return max(bound, Fraction(1))


def dphi_norm_bound(plans: Sequence[WavePlan], k_order: int,
                    gamma_norms: Sequence[Scalar], *,
                    prec: int = 320, grid: int = 1 << 10) -> Scalar:
    """Safety-doubled sampled bound for the composed waves' derivative norm
    through order k_order+1, certified against the a priori ceiling.

    The empty composition is the identity with norm exactly 1.
    """
    if not plans:
        return Scalar.one(prec)
    sups = stack_derivative_sups(plans, k_order + 1, prec=prec, grid=grid)
    used = scalar_max(*sups[1:]) * NORM_SAFETY
    ceiling = analytic_dphi_bound(plans, k_order, gamma_norms)
    if used.as_fraction() > ceiling:
        raise ArithmeticError(
            "sampled wave-composition norm exceeds its a priori ceiling; "
            "the sweep or the stage parameters are inconsistent")
    return used


def stack_difference_sups(stack: ConjugationStack, k: int, order: int, *,
                          prec: int = 320, grid: int = 1 << 10) -> list[Scalar]:
    """Sampled suprema of |D^m| of (stage-k composition minus stage-(k-1)
    composition), m = 0..order, over the structured cells of stage k."""
    if not 1 <= k <= stack.K:
        raise ValueError(f"stage {k} outside [1, {stack.K}]")
    sups = [Scalar.zero(prec) for _ in range(order + 1)]
    for anchor, lo, hi, pts in _offset_cells(stack.plans[:k], grid):
        for idx in range(pts + 1):
            df = lo + (hi - lo) * Fraction(idx, pts)
            delta = Scalar.from_fraction(df, prec)
            a = stack_jet(stack, delta, order, k, anchor=anchor)
            b = stack_jet(stack, delta, order, k - 1, anchor=anchor)
            for m in range(order + 1):
                d = abs(a.D(m) - b.D(m))
                if d > sups[m]:
                    sups[m] = d
    return sups


# bump-profile offsets hit by window sweeps: parabola core, inner and outer
# glue, plus the vanishing center; a uniform grid would alias with the wave
# lattice whenever the sample count shares structure with q
_SWEEP_PHASES = (Fraction(-1, 8), Fraction(1, 32), Fraction(3, 16),
                 Fraction(-1, 20), Fraction(1, 10), Fraction(-3, 32),
                 Fraction(1, 8), Fraction(0), Fraction(-1, 10))


def travel_window_taus(plan: WavePlan, samples: int) -> list[Fraction]:
    """Sample times of the stage's swept chart window M, placed at fixed
    profile phases across translates so every sample sits in a controlled
    position of some bump (or exactly at a vanishing center)."""
    q = plan.q
    taus = []
    for s in range(samples):
        m = (s * q) // samples
        z = _SWEEP_PHASES[s % len(_SWEEP_PHASES)]
        taus.append(plan.j + Fraction(-m, q) + z / q)
    return taus


def flow_difference_norm(stack: ConjugationStack, k: int, t, *,
                         order: Optional[int] = None, samples: int = 9,
                         taus: Optional[Sequence[Fraction]] = None) -> Scalar:
    """Sampled sup over the active window of max_{m <= order} of
    |D^m (stage-k flow - stage-(k-1) flow)| at time t.

    The difference vanishes identically outside the chart image of the
    stage's swept window, so the sweep stays on that window.
    """
    if not 1 <= k <= stack.K:
        raise ValueError(f"stage {k} outside [1, {stack.K}]")
    order = k if order is None else order
    plan = stack.plans[k - 1]
    prec = stack.precision_bits
    if taus is None:
        taus = travel_window_taus(plan, samples)
    best = Scalar.zero(prec)
    for tau_f in taus:
        tau = Scalar.from_fraction(tau_f, prec)
        x = stack.table.psi_point(tau)
        a = flow_jet(stack, k, t, x, order)
        b = flow_jet(stack, k - 1, t, x, order)
        for m in range(order + 1):
            d = abs(a.D(m) - b.D(m))
            if d > best:
                best = d
    return best


def field_difference_c1(stack: ConjugationStack, k: int, *,
                        samples_per_cell: int = 64) -> Scalar:
    """Sampled C1-size of the stage-k field change.

    Swept where it is largest: the straight zone (base speed 1) and the early
    transition sub-blocks (largest base-field slope).
    """
    if not 1 <= k <= stack.K:
        raise ValueError(f"stage {k} outside [1, {stack.K}]")
    prec = stack.precision_bits
    field = stack.field
    cells: list[tuple[Fraction, Fraction]] = [(Fraction(2, 3), Fraction(1))]
    for n in range(0, 4):
        for r in field.regions(n):
            if r.kind == "transition":
                cells.append((r.x_lo, r.x_hi))
    best = Scalar.zero(prec)
    for lo, hi in cells:
        for idx in range(samples_per_cell + 1):
            xf = lo + (hi - lo) * Fraction(idx, samples_per_cell)
            x = Scalar.from_fraction(xf, prec)
            a = xi_k_jet(stack, k, x, 1)
            b = xi_k_jet(stack, k - 1, x, 1)
            for m in range(2):
                d = abs(a.D(m) - b.D(m))
                if d > best:
                    best = d
    return best


# -- general-mode window certification ----------------------------------------------


def general_window_ok(table: TravelTable, window: OrbitWindow, k: int, q: int,
                      dphi_norm: Scalar, gamma_norms: Sequence[Scalar],
                      field_c1: Scalar, *, grid: int = 64) -> bool:
    """Check the three size conditions that replace the plateau gate when the
    base field is only assumed contracting: chart derivatives below 1 past
    j - 1, inverse-chart derivatives priced by powers of the fast speed on
    the window, and the square-root amplitude small against the fast speed's
    doubled power."""
    prec = table.precision_bits
    j, v = window.j, window.v
    w = window.u.sqrt()

    if k >= 2:
        top = Scalar.zero(prec)
        lo, hi = Fraction(j - 1), Fraction(j + 3)
        for idx in range(grid + 1):
            tf = lo + (hi - lo) * Fraction(idx, grid)
            pj = table.psi_jet(Scalar.from_fraction(tf, prec), k)
            for m in range(1, k + 1):
                a = abs(pj.D(m))
                if a > top:
                    top = a
        if not top < Scalar.one(prec):
            return False

    x_hi = table.psi_point(Scalar.from_int(j - 1, prec))
    x_lo = table.psi_point(Scalar.from_int(j + 1, prec))
    lo_f, hi_f = x_lo.as_fraction(), x_hi.as_fraction()
    for idx in range(grid + 1):
        xf = lo_f + (hi_f - lo_f) * Fraction(idx, grid)
        ij = table.psi_inverse_jet(Scalar.from_fraction(xf, prec), k)
        for m in range(1, k + 1):
            if not abs(ij.D(m)) < v ** (-m - 1):
                return False

    gnorm = Scalar.zero(prec)
    for m in range(k + 2):
        term = w * q ** m * gamma_norms[m].with_precision(prec)
        if term > gnorm:
            gnorm = term
    bell = bell_number(k + 1)
    rhs = (Scalar.pow2(-(k * k) - 4, prec) * v ** (2 * k)
           / (bell * bell * dphi_norm ** (k + 1) * field_c1))
    return gnorm <= rhs


# -- full build ---------------------------------------------------------------------


def build_stack(table: TravelTable, *, mode: str = "sergeraert", stages: int = 3,
                norm_prec: int = 320, norm_grid: int = 1 << 10,
                refine_samples: int = 9,
                oracle=None) -> ConjugationStack:
    """Select every stage's parameters, certify the size gates, and refine the
    nested schedule of good times down to depth `stages`."""
    if stages < 1:
        raise ValueError("need at least one stage")
    prec = table.precision_bits
    field = table.field
    gamma_norms = gamma_norm_table(stages + 1, prec=max(192, norm_prec // 2))
    xi0_norm = xi0_c1_bound(prec=max(192, norm_prec // 2))

    windows: list[OrbitWindow] = []
    if mode == "general":
        oracle = oracle if oracle is not None else SergeraertOracle(table)
        windows = list(search_orbit_indices_general(oracle, stages + 2,
                                                    precision_bits=prec))

    plans: list[WavePlan] = []
    intervals = [IntervalSet.initial(prec)]
    measured: list[dict] = []
    stream = rationals()
    q_prev, n_prev, win_at = 1, 3, 0

    for k in range(1, stages + 1):
        r = next(stream)
        q = choose_qk(intervals[-1], q_prev, r)
        times = select_Tk(intervals[-1], q)
        dphi = dphi_norm_bound(plans, k, gamma_norms, prec=norm_prec, grid=norm_grid)

        if mode == "sergeraert":
            n = choose_nk(k, q, n_prev, table.n_max, gamma_norms, dphi, xi0_norm)
            idx = table.find_indices(n)
            plan = WavePlan(
                k=k, q=q, n=n, i=idx.i, j=idx.j,
                w=field.w(n, prec), u=field.u(n, prec), v=field.v(n, prec),
                r=r, grid_times=tuple(times),
                u_exact=u_value(n), v_exact=v_value(n), w_exact=w_value(n))
        else:
            c1 = oracle.c1_bound().with_precision(prec)
            chosen = None
            while win_at < len(windows):
                win = windows[win_at]
                win_at += 1
                if general_window_ok(table, win, k, q, dphi, gamma_norms, c1):
                    chosen = win
                    break
            if chosen is None:
                raise DepthExhaustedError(
                    f"stage {k}: certified windows exhausted in general mode")
            plan = WavePlan(
                k=k, q=q, n=n_prev + 1, i=chosen.i, j=chosen.j,
                w=chosen.u.sqrt(), u=chosen.u, v=chosen.v,
                r=r, grid_times=tuple(times))

        gamma_c1 = stage_gamma_norm(plan.w.as_fraction(), q, 1, gamma_norms)
        if not gamma_c1 < 1:
            raise DepthExhaustedError(
                f"stage {k}: scaled profile is not C1-small (got {gamma_c1})")

        plans.append(plan)
        holder = ConjugationStack(table=table, mode=mode, plans=tuple(plans),
                                  intervals=tuple(intervals), measured=tuple(measured))

        def bound_check(ts: Scalar, _stack=holder, _k=k) -> Scalar:
            return flow_difference_norm(_stack, _k, ts, order=_k,
                                        samples=refine_samples)

        intervals.append(refine_Ik(times, intervals[-1], r, bound_check, k, prec))

        grid_sup = Scalar.zero(prec)
        for tf in times:
            d = flow_difference_norm(holder, k, Scalar.from_fraction(tf, prec),
                                     order=k, samples=refine_samples)
            if d > grid_sup:
                grid_sup = d
        measured.append({
            "dphi_upper": dphi,
            "gamma_c1": Scalar.from_fraction(gamma_c1, prec),
            "flow_diff_grid_sup": grid_sup,
        })

        q_prev, n_prev = q, plan.n

    return ConjugationStack(table=table, mode=mode, plans=tuple(plans),
                            intervals=tuple(intervals), measured=tuple(measured))
