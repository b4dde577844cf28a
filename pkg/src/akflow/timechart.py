"""Travel-time chart for the base field: the unit-time parametrization psi.

The chart solves dx/dt = xi0(x) with x(0) = 1.  Since xi0 is piecewise a
plateau constant or a smoothed-step transition, travel times accumulate as
exact closed forms on plateaus plus adaptive quadrature of 1/(-xi0) on
transition sub-blocks.  All position queries route through travel_time and
its inverse psi_point; orbit points with astronomically large indices are
reached directly by one inversion, never by stepping.

Consistency contract: every solved (x, t) pair is inserted into shared
memo caches, so travel_time(psi_point(t)) reproduces t bit-for-bit and
repeated queries return identical Scalars.  Downstream comparisons between
two evaluation routes rely on this to cancel the chart's quadrature error.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction

from .basefield import SergeraertField
from .jets import Jet, jet_compose, jet_reciprocal, MAX_ORDER
from .quadrature import integrate_adaptive
from .scalar import (DEFAULT_PRECISION, Scalar, exact_add, exact_sub,
                     scalar_max)


class TableRangeError(ValueError):
    """Query outside the tabulated block range."""


class MarginError(ArithmeticError):
    """Orbit-index window inequalities failed re-verification."""


class SearchBudgetError(RuntimeError):
    """Window search exhausted its horizon without certifying the trend."""


@dataclass(frozen=True)
class OrbitIndex:
    n: int
    i: int
    j: int
    # slack of the four window inequalities, in position units, all > 0
    margins: tuple[Scalar, Scalar, Scalar, Scalar]


@dataclass(frozen=True)
class OrbitWindow:
    i: int
    j: int
    u: Scalar
    v: Scalar
    ratio: Scalar


class _TimedRegion:
    __slots__ = ("region", "x_lo", "x_hi", "t_hi", "t_lo", "duration", "anchors")

    def __init__(self, region, x_lo: Scalar, x_hi: Scalar, t_hi: Scalar,
                 duration: Scalar):
        self.region = region
        self.x_lo = x_lo
        self.x_hi = x_hi
        self.t_hi = t_hi
        self.duration = duration
        self.t_lo = t_hi + duration
        # sorted (x, t) pairs usable as integration anchors, descending x
        self.anchors: list[tuple[Scalar, Scalar]] = [
            (x_hi, t_hi), (x_lo, self.t_lo)]


def _synchronized(fn):
    """Serialize chart queries: anchor memoization mutates region state."""
    def wrapper(self, *args, **kwargs):
        with self._lock:
            return fn(self, *args, **kwargs)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


class TravelTable:
    """Immutable-after-build chart; queries are pure and memoized."""

    def __init__(self, precision_bits: int = DEFAULT_PRECISION, n_max: int = 7,
                 field: SergeraertField | None = None):
        if n_max < 0:
            raise ValueError("n_max must be non-negative")
        if precision_bits < 512:
            raise ValueError("precision too low for the chart")
        self.precision_bits = precision_bits
        self.n_max = n_max
        self.field = field if field is not None else SergeraertField()
        # Quadrature accuracy only has to dominate the integer selection
        # margins and keep anchor seeding dense; every verified identity
        # routes both of its sides through the same chart, so absolute
        # travel-time error cancels and need not reach criterion scale.
        self.qprec = precision_bits // 8 + 512
        self.tail_exponent = precision_bits // 8 + 404
        self.floor_fraction = Fraction(1, 2 ** (n_max + 1))
        self._lock = threading.RLock()
        self._travel_cache: dict[Scalar, Scalar] = {}
        self._psi_cache: dict[Scalar, Scalar] = {}
        self._regions: list[_TimedRegion] = []
        self._block_entry: dict[int, Scalar] = {}
        self._build()

    # -- construction ------------------------------------------------------

    def _transition_duration(self, x_lo: Scalar, x_hi: Scalar
                             ) -> tuple[Scalar, list]:
        field = self.field
        qprec = self.qprec

        def integrand(z: Scalar) -> Scalar:
            return -(Scalar.one(qprec) / field.xi0_jet(z, 0).value)

        segments: list = []
        got = integrate_adaptive(integrand, x_lo.with_precision(qprec),
                                 x_hi.with_precision(qprec), qprec,
                                 self.tail_exponent, segments=segments)
        return got.with_precision(self.precision_bits), segments

    @staticmethod
    def _seed_anchors(timed: _TimedRegion, segments: list) -> None:
        """Interior anchors at accepted quadrature panel boundaries.

        Each boundary's time is accumulated exactly from whichever region
        edge is nearer in integral mass, so an anchor's inconsistency with
        its nearest edge stays proportional to the mass between them.
        """
        count = len(segments)
        if count < 2:
            return
        suffix = [None] * count          # sum of segment values from k to end
        acc = None
        for k in range(count - 1, -1, -1):
            acc = segments[k][2] if acc is None else exact_add(
                acc, segments[k][2])
            suffix[k] = acc
        prefix = None                    # sum of segment values before k
        for k in range(1, count):
            prefix = segments[k - 1][2] if prefix is None else exact_add(
                prefix, segments[k - 1][2])
            boundary = segments[k][0]
            # time flows right-to-left in x: suffix mass lies between the
            # boundary and the early (t_hi) edge
            if suffix[k] <= prefix:
                t_here = exact_add(timed.t_hi, suffix[k])
            else:
                t_here = exact_sub(timed.t_lo, prefix)
            timed.anchors.append((boundary, t_here))
        timed.anchors.sort(key=lambda a: a[1])

    def _build(self) -> None:
        prec = self.precision_bits
        t = Scalar.zero(prec)
        for n in range(self.n_max + 1):
            self._block_entry[n] = t
            for region in reversed(self.field.regions(n)):
                x_lo = Scalar.from_fraction(region.x_lo, prec)
                x_hi = Scalar.from_fraction(region.x_hi, prec)
                if region.kind == "plateau":
                    duration = Scalar.from_fraction(
                        region.width / region.speed, prec)
                    timed = _TimedRegion(region, x_lo, x_hi, t, duration)
                else:
                    duration, segments = self._transition_duration(x_lo, x_hi)
                    timed = _TimedRegion(region, x_lo, x_hi, t, duration)
                    self._seed_anchors(timed, segments)
                self._regions.append(timed)
                t = timed.t_lo
        self.t_floor = t

    # -- lookups -----------------------------------------------------------

    def block_entry_time(self, n: int) -> Scalar:
        """C_n: travel time at which the orbit reaches x = 2^-n."""
        if n not in self._block_entry:
            raise TableRangeError(f"block {n} not tabulated")
        return self._block_entry[n]

    def block_duration(self, n: int) -> Scalar:
        if n not in self._block_entry:
            raise TableRangeError(f"block {n} not tabulated")
        start = self._block_entry[n]
        if n + 1 in self._block_entry:
            return self._block_entry[n + 1] - start
        return self.t_floor - start

    def _region_by_position(self, x: Scalar) -> _TimedRegion:
        lo, hi = 0, len(self._regions) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if x.cmp_fraction(self._regions[mid].region.x_lo) < 0:
                lo = mid + 1
            else:
                hi = mid
        return self._regions[lo]

    def _region_by_time(self, t: Scalar) -> _TimedRegion:
        lo, hi = 0, len(self._regions) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if t > self._regions[mid].t_lo:
                lo = mid + 1
            else:
                hi = mid
        return self._regions[lo]

    # -- forward map -------------------------------------------------------

    @_synchronized
    def travel_time(self, x: Scalar) -> Scalar:
        """psi^-1(x): time for the orbit of 1 to reach position x."""
        prec = self.precision_bits
        x = x.with_precision(prec)
        if x.sign <= 0:
            raise TableRangeError("positions must be positive")
        one = Scalar.one(prec)
        if x >= one:
            return one - x
        if x.cmp_fraction(self.floor_fraction) < 0:
            raise TableRangeError(
                f"position below tabulated floor 2^-{self.n_max + 1}")
        hit = self._travel_cache.get(x)
        if hit is not None:
            return hit
        timed = self._region_by_position(x)
        if timed.region.kind == "plateau":
            speed = Scalar.from_fraction(timed.region.speed, prec)
            t = timed.t_hi + (timed.x_hi - x) / speed
        else:
            t = self._transition_time(timed, x)
        self._travel_cache[x] = t
        return t

    def _transition_time(self, timed: _TimedRegion, x: Scalar) -> Scalar:
        ax, at = min(timed.anchors, key=lambda a: abs(a[0] - x))
        if ax == x:
            return at.with_precision(self.precision_bits)
        t = (at + self._signed_leg(x, ax)).with_precision(self.precision_bits)
        self._insert_anchor(timed, x, t)
        return t

    def _signed_leg(self, x: Scalar, ax: Scalar) -> Scalar:
        """Travel-time increment from position ax to position x (x <= ax means
        forward motion, positive increment)."""
        field = self.field
        qprec = self.qprec

        def integrand(z: Scalar) -> Scalar:
            return -(Scalar.one(qprec) / field.xi0_jet(z, 0).value)

        if x < ax:
            leg = integrate_adaptive(integrand, x.with_precision(qprec),
                                     ax.with_precision(qprec), qprec,
                                     self.tail_exponent)
            return leg.with_precision(self.precision_bits)
        leg = integrate_adaptive(integrand, ax.with_precision(qprec),
                                 x.with_precision(qprec), qprec,
                                 self.tail_exponent)
        return -leg.with_precision(self.precision_bits)

    @staticmethod
    def _insert_anchor(timed: _TimedRegion, x: Scalar, t: Scalar) -> None:
        anchors = timed.anchors
        for k, (ax, _) in enumerate(anchors):
            if x > ax:
                anchors.insert(k, (x, t))
                return
            if x == ax:
                return
        anchors.append((x, t))

    # -- inverse map -------------------------------------------------------

    @_synchronized
    def psi_point(self, t: Scalar) -> Scalar:
        """Position of the orbit of 1 at time t."""
        prec = self.precision_bits
        t = t.with_precision(prec)
        one = Scalar.one(prec)
        if t.sign <= 0:
            # unit-speed region, x >= 1
            return one - t
        if t > self.t_floor:
            raise TableRangeError("time beyond tabulated range")
        hit = self._psi_cache.get(t)
        if hit is not None:
            return hit
        timed = self._region_by_time(t)
        if timed.region.kind == "plateau":
            speed = Scalar.from_fraction(timed.region.speed, prec)
            x = timed.x_hi - speed * (t - timed.t_hi)
        else:
            x = self._transition_position(timed, t)
        self._psi_cache[t] = x
        self._travel_cache[x] = t
        if timed.region.kind == "transition":
            self._insert_anchor(timed, x, t)
        return x

    def _transition_position(self, timed: _TimedRegion, t: Scalar) -> Scalar:
        prec = self.precision_bits
        # anchors are kept sorted by descending x = ascending time; take the
        # consecutive pair whose times bracket t so the search interval is a
        # single quadrature segment rather than the whole band
        anchors = timed.anchors
        idx = 0
        for k, (_, at) in enumerate(anchors):
            if at == t:
                return anchors[k][0].with_precision(prec)
            if at < t:
                idx = k
        hi_x, hi_t = anchors[idx]                       # T(hi_x) <= t
        lo_x, lo_t = anchors[min(idx + 1, len(anchors) - 1)]
        x_cur, t_cur = (hi_x, hi_t) if t - hi_t <= lo_t - t else (lo_x, lo_t)
        # The residual is only meaningful down to the quadrature tail of the
        # path integrated so far, which is proportional to the initial anchor
        # distance; a |t|-scaled tolerance would be unreachable when t sits
        # on top of a large accumulated travel time.
        tol = abs(t_cur - t) * Scalar.pow2(16 - self.tail_exponent, prec)
        # the accumulated travel time itself carries working-precision
        # rounding, so residuals below that scale are unreachable noise
        noise = scalar_max(abs(t), Scalar.one(prec)) * Scalar.pow2(
            -prec + 24, prec)
        tol = scalar_max(tol, noise)
        width_stop = Scalar.pow2(-prec + 8, prec)
        half = Scalar.pow2(-1, prec)
        stale_side = 0
        last_err = None
        for _ in range(400):
            err = t_cur - t
            if abs(err) <= tol:
                return x_cur.with_precision(prec)
            if hi_x - lo_x <= hi_x * width_stop:
                return x_cur.with_precision(prec)
            speed = abs(self.field.xi0_jet(x_cur, 0).value)
            # one quadrature-precision ulp of position is the finest step the
            # leg integrals can see; time residuals below its travel cost are
            # unreachable, which matters when a learned anchor sits almost on
            # top of the query
            res_floor = (abs(x_cur) * Scalar.pow2(8 - self.qprec, prec)
                         / speed)
            if abs(err) <= res_floor:
                return x_cur.with_precision(prec)
            x_next = (x_cur + err * speed).with_precision(prec)
            if not (lo_x < x_next < hi_x) or (
                    last_err is not None and abs(err) > last_err):
                # Illinois false position: interpolate in time between the
                # bracket ends; a midpoint in x stalls when the speed spans
                # many octaves across the segment
                f_lo, f_hi = lo_t - t, hi_t - t
                if stale_side > 0:
                    f_lo = f_lo * half ** stale_side
                elif stale_side < 0:
                    f_hi = f_hi * half ** (-stale_side)
                span = f_lo - f_hi
                x_next = ((hi_x * f_lo - lo_x * f_hi) / span
                          ).with_precision(prec)
                if not (lo_x < x_next < hi_x):
                    x_next = (lo_x + hi_x) * half
            last_err = abs(err)
            t_next = t_cur + self._signed_leg(x_next, x_cur)
            if t_next == t_cur and x_next != x_cur:
                # the step rounded away inside the leg quadrature
                return x_cur.with_precision(prec)
            # T is decreasing in x: T(x) > t means x is left of the target
            if t_next > t:
                lo_x, lo_t = x_next, t_next
                stale_side = min(stale_side, 0) - 1
            else:
                hi_x, hi_t = x_next, t_next
                stale_side = max(stale_side, 0) + 1
            x_cur, t_cur = x_next, t_next
        raise ArithmeticError("transition inversion did not converge")

    # -- jets --------------------------------------------------------------

    def psi_jet(self, t: Scalar, order: int) -> Jet:
        """Jet of psi at t via the transport D^{m+1} psi = D^m (xi0 o psi)."""
        if order > MAX_ORDER:
            raise ValueError(f"order limited to {MAX_ORDER}")
        x = self.psi_point(t)
        t = t.with_precision(self.precision_bits)
        derivs = [x]
        for m in range(1, order + 1):
            inner = Jet(t, tuple(derivs))
            outer = self.field.xi0_jet(x, m - 1)
            comp = jet_compose(outer, inner)
            derivs.append(comp.D(m - 1))
        return Jet(t, tuple(derivs))

    def psi_inverse_jet(self, x: Scalar, order: int) -> Jet:
        """Jet of psi^-1 at x; D psi^-1 = 1/xi0."""
        if order > MAX_ORDER:
            raise ValueError(f"order limited to {MAX_ORDER}")
        t = self.travel_time(x)
        x = x.with_precision(self.precision_bits)
        derivs = [t]
        if order >= 1:
            recip = jet_reciprocal(self.field.xi0_jet(x, order - 1))
            derivs.extend(recip.D(m) for m in range(order))
        return Jet(x, tuple(derivs))

    # -- orbit indices -----------------------------------------------------

    def find_indices(self, n: int) -> OrbitIndex:
        """Integer orbit times landing in the slow and fast windows of scale n."""
        if n < 4:
            raise ValueError("orbit indices are defined for n >= 4")
        if n > self.n_max:
            raise TableRangeError(f"n = {n} beyond tabulated n_max = {self.n_max}")
        prec = self.precision_bits
        # slow window right edge: 2^-n + 2^-n/6; fast window right edge:
        # 2^-n - 2^-n-1/3
        slow_edge = Scalar.from_fraction(Fraction(7, 6 * 2**n), prec)
        fast_edge = Scalar.from_fraction(
            Fraction(1, 2**n) - Fraction(1, 3 * 2**(n + 1)), prec)
        i = self.travel_time(slow_edge).ceil() + 1
        j = self.travel_time(fast_edge).ceil() + 1

        def as_scalar(f: Fraction) -> Scalar:
            return Scalar.from_fraction(f, prec)

        a_ip2 = self.psi_point(Scalar.from_int(i + 2, prec))
        a_im1 = self.psi_point(Scalar.from_int(i - 1, prec))
        a_jp2 = self.psi_point(Scalar.from_int(j + 2, prec))
        a_jm1 = self.psi_point(Scalar.from_int(j - 1, prec))
        slow_lo = as_scalar(Fraction(1, 2**n) - Fraction(1, 6 * 2**(n + 1)))
        slow_hi = as_scalar(Fraction(7, 6 * 2**n))
        fast_lo = as_scalar(Fraction(1, 2**(n + 1)) + Fraction(1, 3 * 2**(n + 1)))
        fast_hi = as_scalar(Fraction(1, 2**n) - Fraction(1, 3 * 2**(n + 1)))
        margins = (a_ip2 - slow_lo, slow_hi - a_im1,
                   a_jp2 - fast_lo, fast_hi - a_jm1)
        ok = (margins[0].sign > 0 and margins[1].sign > 0
              and margins[2].sign > 0 and margins[3].sign > 0
              and a_ip2 < a_im1 and a_jp2 < a_jm1)
        if not ok:
            raise MarginError(f"window inequalities failed at n = {n}")
        return OrbitIndex(n=n, i=i, j=j, margins=margins)


class SergeraertOracle:
    """Base-field oracle backed by the travel table."""

    flat_at_origin = True

    def __init__(self, table: TravelTable):
        self.table = table
        self._c1 = None

    def field_jet(self, x: Scalar, order: int) -> Jet:
        return self.table.field.xi0_jet(x, order)

    def travel_time(self, x: Scalar) -> Scalar:
        return self.table.travel_time(x)

    def point_at_time(self, t: Scalar) -> Scalar:
        return self.table.psi_point(t)

    def c1_bound(self) -> Scalar:
        if self._c1 is None:
            from .basefield import xi0_c1_bound
            self._c1 = xi0_c1_bound()
        return self._c1


def _window_extremum(oracle, lo: Scalar, hi: Scalar, prec: int,
                     points: int = 33) -> tuple[Scalar, Scalar]:
    """Sampled (inf, sup) of |field| over [lo, hi]."""
    step = (hi - lo) / (points - 1)
    inf = sup = None
    for k in range(points):
        v = abs(oracle.field_jet(lo + step * k, 0).value)
        if inf is None or v < inf:
            inf = v
        if sup is None or v > sup:
            sup = v
    return inf, sup


def search_orbit_indices_general(oracle, count: int, *, per_octave: int = 16,
                                 max_octaves: int = 64,
                                 precision_bits: int | None = None
                                 ) -> list[OrbitWindow]:
    """Greedy scan for alternating slow/fast orbit windows.

    Walks a geometric grid of positions descending from 1, detecting flat
    runs of the one-step displacement y - f0(y).  A slow run is a new record
    minimum; its level is certified when a later flat run rebounds above it
    and the window pair satisfies: V-windows flat, disjoint, andoscillation
    ratio log u / log v strictly above both the jet-order ceiling and every
    previously accepted ratio.  Raises SearchBudgetError when the horizon
    (octave budget or table floor) is exhausted first.
    """
    if count == 0:
        return []
    prec = precision_bits if precision_bits is not None else DEFAULT_PRECISION
    out: list[OrbitWindow] = []
    log2 = Scalar.from_int(2, prec).log()

    run_value: Scalar | None = None   # displacement value of current flat run
    run_length = 0
    record: Scalar | None = None      # smallest completed-run value so far
    pending_slow: tuple[Scalar, Scalar] | None = None  # (y_sample, d_value)
    last_ratio: Scalar | None = None
    flat_tol = Scalar.pow2(-12, prec)
    order_floor = Scalar.from_int(MAX_ORDER, prec)

    def displacement(y: Scalar) -> Scalar:
        fy = oracle.point_at_time(oracle.travel_time(y) + 1)
        d = y - fy
        if d.sign <= 0:
            raise ValueError("oracle map is not contracting at the sample")
        return d

    def certify(slow: tuple[Scalar, Scalar], fast: tuple[Scalar, Scalar]
                ) -> OrbitWindow | None:
        t_slow = oracle.travel_time(slow[0])
        t_fast = oracle.travel_time(fast[0])
        i = t_slow.ceil() + 1
        j = t_fast.ceil() + 1
        a = [oracle.point_at_time(Scalar.from_int(l, prec))
             for l in (i + 2, i - 2, j + 2, j - 2)]
        u_inf, u_sup = _window_extremum(oracle, a[0], a[1], prec)
        v_inf, v_sup = _window_extremum(oracle, a[2], a[3], prec)
        one = Scalar.one(prec)
        if u_sup > u_inf * (one + flat_tol) or v_sup > v_inf * (one + flat_tol):
            return None
        if not (a[3] < a[0] or a[1] < a[2]):  # V_i and V_j must be disjoint
            return None
        ratio = abs(u_sup.log()) / abs(v_inf.log())
        if ratio <= order_floor:
            return None
        if last_ratio is not None and ratio <= last_ratio:
            return None
        return OrbitWindow(i=i, j=j, u=u_sup, v=v_inf, ratio=ratio)

    total_steps = max_octaves * per_octave
    step = log2 / per_octave
    for k in range(total_steps + 1):
        y = (-(step * k)).exp() if k else Scalar.one(prec)
        try:
            d = displacement(y)
        except (TableRangeError, ValueError):
            break
        if run_value is not None and abs(d - run_value) <= run_value * flat_tol:
            run_length += 1
        else:
            run_value = d
            run_length = 1
        if run_length < 3:
            continue
        # inside a certified flat run
        if record is None or d < record.shift(-3):
            if record is None:
                record = d
                continue
            record = d
            pending_slow = (y, d)
        elif pending_slow is not None and d > pending_slow[1].shift(3):
            window = certify(pending_slow, (y, d))
            pending_slow = None
            if window is not None:
                out.append(window)
                last_ratio = window.ratio
                if len(out) == count:
                    return out
    raise SearchBudgetError(
        f"certified only {len(out)} of {count} windows within the horizon")
