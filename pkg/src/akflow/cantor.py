"""Nested interval schedule whose intersection is a Cantor set of times.

Each stage k keeps 2^k disjoint closed dyadic intervals, two inside every
component of the previous stage, centered on grid times p/q_k and shrunk
until they dodge the k-th enumerated rational and pass a sampled closeness
bound supplied by the caller.  Endpoints are dyadic Scalars rounded inward,
so every stored component is a strict subset of the true shrunken interval
and all rational-avoidance checks are exact comparisons.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Sequence

from .scalar import Scalar


class GridMissError(ArithmeticError):
    """A component's interior met fewer than two grid points."""


class WidthUnderflowError(ArithmeticError):
    """Interval shrinking hit the precision floor without satisfying checks."""


class BoundCheckError(ArithmeticError):
    """Closeness bound violated at a grid time (upstream contract breach)."""


def rationals() -> Iterator[Fraction]:
    """Enumerate the rationals strictly between 0 and 1.

    Breadth-first mediant tree between 0/1 and 1/1: 1/2, 1/3, 2/3, 1/4,
    2/5, 3/5, 3/4, ...  Every fraction appears exactly once, in lowest
    terms, and the enumeration is dense in (0, 1).
    """
    queue: deque[tuple[Fraction, Fraction]] = deque(
        [(Fraction(0), Fraction(1))])
    while True:
        lo, hi = queue.popleft()
        med = Fraction(lo.numerator + hi.numerator,
                       lo.denominator + hi.denominator)
        yield med
        queue.append((lo, med))
        queue.append((med, hi))


@dataclass(frozen=True)
class Component:
    lo: Scalar
    hi: Scalar
    parent: int          # index into the previous stage's components
    center: Fraction     # the grid time this component brackets

    def contains_fraction(self, f: Fraction) -> bool:
        return self.lo.cmp_fraction(f) <= 0 and self.hi.cmp_fraction(f) >= 0

    def width(self) -> Scalar:
        return self.hi - self.lo


@dataclass(frozen=True)
class CantorAddress:
    bits: str

    def __post_init__(self):
        if any(c not in "01" for c in self.bits):
            raise ValueError("address bits must be 0 or 1")


@dataclass(frozen=True)
class IntervalSet:
    k: int
    components: tuple[Component, ...]
    excluded: tuple[Fraction, ...]

    @classmethod
    def initial(cls, precision_bits: int) -> "IntervalSet":
        comp = Component(lo=Scalar.zero(precision_bits),
                         hi=Scalar.one(precision_bits),
                         parent=-1, center=Fraction(1, 2))
        return cls(k=0, components=(comp,), excluded=())

    def validate(self, prev: "IntervalSet | None") -> None:
        """Structural invariants; raises ValueError on any breach."""
        if len(self.components) != 2 ** self.k:
            raise ValueError("component count must double per stage")
        for a, b in zip(self.components, self.components[1:]):
            if not a.hi < b.lo:
                raise ValueError("components must be disjoint with gaps")
        for comp in self.components:
            if not comp.lo < comp.hi:
                raise ValueError("components must have nonzero length")
            for r in self.excluded:
                if comp.contains_fraction(r):
                    raise ValueError(f"component contains excluded {r}")
        if prev is None:
            return
        seen: dict[int, int] = {}
        for comp in self.components:
            par = prev.components[comp.parent]
            if not (par.lo < comp.lo and comp.hi < par.hi):
                raise ValueError("component must sit inside parent interior")
            seen[comp.parent] = seen.get(comp.parent, 0) + 1
        if sorted(seen) != list(range(len(prev.components))) or any(
                c != 2 for c in seen.values()):
            raise ValueError("each parent must carry exactly two children")

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "components": [
                {
                    "lo_hex": c.lo.to_hex(),
                    "hi_hex": c.hi.to_hex(),
                    "parent": c.parent,
                    "excluded_rationals": [str(r) for r in self.excluded],
                }
                for c in self.components
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict, precision_bits: int) -> "IntervalSet":
        comps = []
        excluded: tuple[Fraction, ...] = ()
        for entry in data["components"]:
            lo = Scalar.from_hex(entry["lo_hex"], precision_bits)
            hi = Scalar.from_hex(entry["hi_hex"], precision_bits)
            excluded = tuple(Fraction(s) for s in entry["excluded_rationals"])
            mid = (lo + hi) * Scalar.pow2(-1, precision_bits)
            comps.append(Component(lo=lo, hi=hi, parent=entry["parent"],
                                   center=mid.as_fraction()))
        return cls(k=data["k"], components=tuple(comps), excluded=excluded)


def select_Tk(prev: IntervalSet, q: int) -> list[Fraction]:
    """Two smallest strictly interior multiples of 1/q in each component."""
    out: list[Fraction] = []
    for idx, comp in enumerate(prev.components):
        lo_f = comp.lo.as_fraction()
        hi_f = comp.hi.as_fraction()
        p = math.floor(lo_f * q) + 1
        picked: list[Fraction] = []
        while len(picked) < 2:
            cand = Fraction(p, q)
            if cand >= hi_f:
                raise GridMissError(
                    f"component {idx} holds {len(picked)} grid points of 1/{q}")
            if cand > lo_f:
                picked.append(cand)
            p += 1
        out.extend(picked)
    return out


def refine_Ik(times: Sequence[Fraction], prev: IntervalSet, r: Fraction,
              bound_check: Callable[[Scalar], Scalar], k: int,
              precision_bits: int) -> IntervalSet:
    """Shrink closed intervals around the grid times until admissible.

    Admissible means: strictly inside the parent interior, excluding the
    enumerated rational r, and with the sampled closeness bound at most
    2^-k at nine evenly spaced times per interval.  The caller-provided
    bound must already be at most 2^-k-4 at the grid times themselves.
    """
    prec = precision_bits
    stage_bound = Scalar.pow2(-k, prec)
    grid_bound = Scalar.pow2(-k - 4, prec)
    floor = Fraction(1, 2 ** (prec // 2))
    for t in times:
        if bound_check(Scalar.from_fraction(t, prec)) > grid_bound:
            raise BoundCheckError(f"closeness bound fails at grid time {t}")

    def parent_of(t: Fraction) -> int:
        for idx, comp in enumerate(prev.components):
            if comp.lo.cmp_fraction(t) < 0 and comp.hi.cmp_fraction(t) > 0:
                return idx
        raise GridMissError(f"grid time {t} is not interior to any component")

    comps: list[Component] = []
    # grid times are multiples of 1/q; reduced forms still lcm back to q
    q = math.lcm(*(t.denominator for t in times))
    for t in times:
        par_idx = parent_of(t)
        par = prev.components[par_idx]
        dist = min(t - par.lo.as_fraction(), par.hi.as_fraction() - t)
        half = min(Fraction(1, 4 * q), dist / 4)
        while True:
            if half < floor:
                raise WidthUnderflowError(
                    f"interval at {t} shrank below 2^-{prec // 2}")
            lo = Scalar.from_fraction(t - half, prec, rnd="c")
            hi = Scalar.from_fraction(t + half, prec, rnd="f")
            ok = (par.lo < lo and hi < par.hi and lo < hi
                  and not (lo.cmp_fraction(r) <= 0 <= hi.cmp_fraction(r)))
            if ok:
                eighth = (hi - lo).shift(-3)
                samples = [lo] + [
                    lo + eighth * Scalar.from_int(i, prec)
                    for i in range(1, 8)] + [hi]
                for sample in samples:
                    if bound_check(sample) > stage_bound:
                        ok = False
                        break
            if ok:
                comps.append(Component(lo=lo, hi=hi, parent=par_idx, center=t))
                break
            half = half / 2

    out = IntervalSet(k=k, components=tuple(comps),
                      excluded=prev.excluded + (r,))
    out.validate(prev)
    return out


def cantor_point(address: CantorAddress, sets: Sequence[IntervalSet]
                 ) -> Component:
    """Component of the addressed nested chain; brackets a limit-set point.

    sets holds the stages in order, starting with the stage-0 root.
    """
    if len(address.bits) >= len(sets):
        raise ValueError("address longer than the refined stages")
    idx = 0
    depth = 0
    for bit in address.bits:
        depth += 1
        children = [i for i, c in enumerate(sets[depth].components)
                    if c.parent == idx]
        children.sort(key=lambda i: sets[depth].components[i].lo)
        idx = children[int(bit)]
    return sets[depth].components[idx]
