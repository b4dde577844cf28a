"""Nested interval schedule: enumeration, grid selection, shrinking, addressing.

Expected values are derived by hand: the mediant-tree prefix, interior
grid counts, and the exact halving sequence for each shrink scenario.
"""

import math
from fractions import Fraction

import pytest

from akflow.cantor import (
    BoundCheckError,
    CantorAddress,
    Component,
    GridMissError,
    IntervalSet,
    WidthUnderflowError,
    cantor_point,
    rationals,
    refine_Ik,
    select_Tk,
)
from akflow.scalar import Scalar

PREC = 256


def F(a, b=1):
    return Fraction(a, b)


def zero_bound(t: Scalar) -> Scalar:
    return Scalar.zero(PREC)


def test_rationals_prefix_and_properties():
    it = rationals()
    first = [next(it) for _ in range(15)]
    assert first == [
        F(1, 2), F(1, 3), F(2, 3), F(1, 4), F(2, 5), F(3, 5), F(3, 4),
        F(1, 5), F(2, 7), F(3, 8), F(3, 7), F(4, 7), F(5, 8), F(5, 7),
        F(4, 5),
    ]
    seen = set(first)
    for _ in range(185):
        r = next(it)
        assert 0 < r < 1
        assert math.gcd(r.numerator, r.denominator) == 1
        assert r not in seen
        seen.add(r)
    assert len(seen) == 200


def test_select_grid_times_unit_interval():
    root = IntervalSet.initial(PREC)
    assert select_Tk(root, 3) == [F(1, 3), F(2, 3)]
    assert select_Tk(root, 7) == [F(1, 7), F(2, 7)]


def test_select_grid_times_misses_narrow_component():
    comp = Component(lo=Scalar.from_fraction(F(3, 10), PREC, rnd="c"),
                     hi=Scalar.from_fraction(F(9, 25), PREC, rnd="f"),
                     parent=0, center=F(1, 3))
    narrow = IntervalSet(k=1, components=(comp,), excluded=())
    with pytest.raises(GridMissError):
        select_Tk(narrow, 3)
    # (0.3, 0.36) holds no multiple of 1/11 at all, let alone two
    with pytest.raises(GridMissError):
        select_Tk(narrow, 11)


def test_refine_first_width_accepted_when_constraints_inactive():
    root = IntervalSet.initial(PREC)
    times = select_Tk(root, 3)
    out = refine_Ik(times, root, F(1, 2), zero_bound, k=1,
                    precision_bits=PREC)
    assert out.k == 1 and len(out.components) == 2
    left, right = out.components
    # half-width is min(1/12, (1/3)/4) = 1/12 on both sides
    assert left.lo.as_fraction() == F(1, 4)          # 1/3 - 1/12, dyadic
    gap_hi = F(5, 12) - left.hi.as_fraction()        # rounded inward
    assert 0 <= gap_hi < F(1, 2 ** (PREC - 8))
    assert right.hi.as_fraction() == F(3, 4)         # 2/3 + 1/12, dyadic
    assert out.excluded == (F(1, 2),)
    out.validate(root)


def test_refine_shrinks_until_rational_excluded():
    root = IntervalSet.initial(PREC)
    times = select_Tk(root, 3)
    # 9/25 = 0.36 sits inside the first two candidates around 1/3:
    # [1/4, 5/12] and [7/24, 3/8] both contain it, [15/48, 17/48] does not
    out = refine_Ik(times, root, F(9, 25), zero_bound, k=1,
                    precision_bits=PREC)
    left, right = out.components
    assert left.lo.as_fraction() == F(5, 16)         # 1/3 - 1/48, dyadic
    assert left.hi.as_fraction() <= F(17, 48)
    assert left.hi.as_fraction() > F(17, 48) - F(1, 2 ** (PREC - 8))
    # the sibling is far from 9/25 and keeps its first width
    assert right.hi.as_fraction() == F(3, 4)
    for comp in out.components:
        assert not comp.contains_fraction(F(9, 25))


def test_refine_shrinks_until_sampled_bound_passes():
    root = IntervalSet.initial(PREC)
    times = select_Tk(root, 3)
    third = Scalar.from_fraction(F(1, 3), PREC)
    half = Scalar.from_fraction(F(1, 2), PREC)
    c64 = Scalar.from_int(64, PREC)

    def ramp(t: Scalar) -> Scalar:
        if t > half:
            return Scalar.zero(PREC)
        return abs(t - third) * c64

    out = refine_Ik(times, root, F(1, 2), ramp, k=1, precision_bits=PREC)
    left, right = out.components
    # need 64*h <= 2^-1, so h halves 1/12 -> 1/24 -> 1/48 -> 1/96 -> 1/192
    assert left.lo.as_fraction() >= F(1, 3) - F(1, 192)
    assert left.hi.as_fraction() <= F(1, 3) + F(1, 192)
    width = left.hi.as_fraction() - left.lo.as_fraction()
    assert width > F(1, 96) - F(1, 2 ** 200)
    # the flat side of the ramp leaves the sibling at first width
    assert right.hi.as_fraction() == F(3, 4)


def test_refine_rejects_bound_breach_at_grid_time():
    root = IntervalSet.initial(PREC)
    times = select_Tk(root, 3)
    one = Scalar.one(PREC)
    with pytest.raises(BoundCheckError):
        refine_Ik(times, root, F(1, 2), lambda t: one, k=1,
                  precision_bits=PREC)


def test_refine_width_underflow():
    root = IntervalSet.initial(PREC)
    times = select_Tk(root, 3)
    grid = {Scalar.from_fraction(t, PREC).to_hex() for t in times}
    one = Scalar.one(PREC)

    def spiky(t: Scalar) -> Scalar:
        # zero exactly at the grid times, too large everywhere else
        return Scalar.zero(PREC) if t.to_hex() in grid else one

    with pytest.raises(WidthUnderflowError):
        refine_Ik(times, root, F(1, 2), spiky, k=1, precision_bits=PREC)


def build_chain():
    """Three refined stages with an inactive bound and grids 3, 11, 177."""
    sets = [IntervalSet.initial(PREC)]
    for k, (q, r) in enumerate(
            [(3, F(1, 2)), (11, F(1, 3)), (177, F(2, 3))], start=1):
        times = select_Tk(sets[-1], q)
        sets.append(refine_Ik(times, sets[-1], r, zero_bound, k=k,
                              precision_bits=PREC))
    return sets


def test_second_stage_grid_times():
    sets = build_chain()
    assert [c.center for c in sets[2].components] == [
        F(3, 11), F(4, 11), F(7, 11), F(8, 11)]


def test_chain_invariants():
    sets = build_chain()
    for k in range(1, 4):
        sets[k].validate(sets[k - 1])
        assert len(sets[k].components) == 2 ** k
    assert sets[3].excluded == (F(1, 2), F(1, 3), F(2, 3))
    widths = [max(c.width().as_fraction() for c in s.components)
              for s in sets]
    assert all(a > b for a, b in zip(widths, widths[1:]))


def test_validate_catches_breaches():
    sets = build_chain()
    bad = IntervalSet(k=1, components=sets[1].components,
                      excluded=(F(1, 4),))  # 1/4 is the left endpoint
    with pytest.raises(ValueError):
        bad.validate(sets[0])
    one_child = IntervalSet(k=1, components=sets[1].components[:1],
                            excluded=sets[1].excluded)
    with pytest.raises(ValueError):
        one_child.validate(sets[0])


def test_cantor_point_addressing():
    sets = build_chain()
    assert cantor_point(CantorAddress(""), sets).lo.is_zero
    assert cantor_point(CantorAddress("0"), sets).center == F(1, 3)
    assert cantor_point(CantorAddress("01"), sets).center == F(4, 11)
    assert cantor_point(CantorAddress("10"), sets).center == F(7, 11)
    assert cantor_point(CantorAddress("11"), sets).center == F(8, 11)
    chain = [cantor_point(CantorAddress("0" * k), sets).width().as_fraction()
             for k in range(4)]
    assert all(a > b for a, b in zip(chain, chain[1:]))
    with pytest.raises(ValueError):
        cantor_point(CantorAddress("0000"), sets)
    with pytest.raises(ValueError):
        CantorAddress("02")


def test_json_round_trip():
    sets = build_chain()
    data = sets[2].to_json_dict()
    assert data["k"] == 2
    assert [c["parent"] for c in data["components"]] == [0, 0, 1, 1]
    assert data["components"][0]["excluded_rationals"] == ["1/2", "1/3"]
    back = IntervalSet.from_json_dict(data, PREC)
    assert back.k == 2
    for orig, rt in zip(sets[2].components, back.components):
        assert orig.lo.to_hex() == rt.lo.to_hex()
        assert orig.hi.to_hex() == rt.hi.to_hex()
        assert orig.parent == rt.parent
