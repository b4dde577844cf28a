import random
from fractions import Fraction

import pytest

from akflow.basefield import (
    ExpFieldOracle,
    SergeraertField,
    alpha_jet,
    beta_jet,
    bump_jet,
    cutoff_jet,
    flat_exp_jet,
    gamma_norm_table,
    gamma_profile_jet,
    oscillation_statistic,
    step_jet,
    u_value,
    v_value,
    xi0_c1_bound,
    xi0_jet,
)
from akflow.scalar import Scalar

PREC = 512


def S(f, prec=PREC):
    return Scalar.from_fraction(Fraction(f), prec)


def central_diff(f, x: Scalar, h: Scalar):
    return (f(x + h) - f(x - h)) / (h * 2)


def test_flat_exp_plateau_and_value():
    assert flat_exp_jet(S(0), 3).value.is_zero
    assert flat_exp_jet(S(-2), 3).D(2).is_zero
    j = flat_exp_jet(Scalar.one(PREC), 2)
    # e(1) = exp(-1); D e = e(x)/x^2 -> same value at x=1
    assert abs((j.value - Scalar.from_int(-1, PREC).exp()).as_fraction()) < Fraction(1, 2**500)
    assert abs((j.D(1) - j.value).as_fraction()) < Fraction(1, 2**490)


def test_step_plateaus_exact():
    for x, want in ((S(0), 0), (S(-3), 0), (S(1), 1), (S(5), 1)):
        j = step_jet(x, 4)
        assert j.value == want
        for m in range(1, 5):
            assert j.D(m).is_zero


def test_step_symmetry_and_midpoint():
    # s(x) + s(1-x) = 1 identically
    rng = random.Random(31)
    one = Scalar.one(PREC)
    for _ in range(10):
        x = S(Fraction(rng.randint(1, 63), 64))
        s1 = step_jet(x, 0).value
        s2 = step_jet(one - x, 0).value
        assert abs((s1 + s2 - 1).as_fraction()) < Fraction(1, 2**500)
    assert abs((step_jet(S(Fraction(1, 2)), 0).value.as_fraction()
                - Fraction(1, 2))) < Fraction(1, 2**500)


def test_step_monotone():
    vals = [step_jet(S(Fraction(i, 16)), 0).value for i in range(17)]
    for a, b in zip(vals, vals[1:]):
        assert a <= b


def test_step_derivative_vs_finite_difference():
    x = S(Fraction(3, 8))
    h = Scalar.pow2(-60, PREC)
    want = central_diff(lambda y: step_jet(y, 0).value, x, h)
    got = step_jet(x, 1).D(1)
    assert abs((got - want).as_fraction()) < Fraction(1, 2**100)


def test_alpha_beta_plateaus():
    # alpha: 0 below 1/6, 1 above 1/3; beta: 0 outside (1/6, 5/6), 1 on [1/3, 2/3]
    j = alpha_jet(S(Fraction(1, 10)), 3)
    assert j.value.is_zero and j.D(1).is_zero
    j = alpha_jet(S(Fraction(2, 5)), 3)
    assert j.value == 1 and j.D(2).is_zero
    j = beta_jet(S(Fraction(1, 2)), 3)
    assert j.value == 1 and j.D(1).is_zero
    for bad in (Fraction(1, 8), Fraction(9, 10)):
        j = beta_jet(S(bad), 3)
        assert j.value.is_zero and j.D(1).is_zero


def test_beta_against_finite_difference_order2():
    # central differences at 512-bit precision; x = 1/4 is a symmetry point
    # where D2 vanishes exactly, so the order-2 check uses x = 1/5
    x = S(Fraction(1, 4))
    h = Scalar.pow2(-50, PREC)
    d1 = central_diff(lambda y: beta_jet(y, 0).value, x, h)
    j = beta_jet(x, 2)
    assert abs((j.D(1) - d1).as_fraction()) <= abs(d1.as_fraction()) * Fraction(1, 10**6)
    assert j.D(2).is_zero

    x = S(Fraction(1, 5))
    d1 = central_diff(lambda y: beta_jet(y, 0).value, x, h)
    d2 = (beta_jet(x + h, 0).value - 2 * beta_jet(x, 0).value
          + beta_jet(x - h, 0).value) / (h * h)
    j = beta_jet(x, 2)
    assert abs((j.D(1) - d1).as_fraction()) <= abs(d1.as_fraction()) * Fraction(1, 10**6)
    assert abs((j.D(2) - d2).as_fraction()) <= abs(d2.as_fraction()) * Fraction(1, 10**6)


def test_cutoff_plateaus():
    assert cutoff_jet(S(0), 2).value == 1
    assert cutoff_jet(S(Fraction(1, 20)), 2).value == 1
    assert cutoff_jet(S(Fraction(-1, 32)), 2).value == 1
    assert cutoff_jet(S(Fraction(1, 4)), 2).value.is_zero
    assert cutoff_jet(S(Fraction(-3, 8)), 2).value.is_zero
    mid = cutoff_jet(S(Fraction(1, 8)), 1)
    assert 0 < mid.value.as_fraction() < 1


def test_gamma_parabolic_core_exact():
    for tf in (Fraction(1, 128), Fraction(-1, 64), Fraction(1, 100), Fraction(0)):
        t = S(tf)
        j = gamma_profile_jet(t, 5)
        assert j.value == t * t * Scalar.pow2(-1, PREC)
        assert j.D(1) == t
        assert j.D(2) == 1
        for m in (3, 4, 5):
            assert j.D(m).is_zero


def test_gamma_support_and_range():
    assert gamma_profile_jet(S(Fraction(1, 4)), 3).value.is_zero
    assert gamma_profile_jet(S(-5), 3).value.is_zero
    rng = random.Random(32)
    for _ in range(40):
        tf = Fraction(rng.randint(-256, 256), 1024)
        v = gamma_profile_jet(S(tf), 0).value
        assert 0 <= v.as_fraction() <= 1
        vneg = gamma_profile_jet(S(-tf), 0).value
        assert abs((v - vneg).as_fraction()) < Fraction(1, 2**490)


def test_bump_jet_dispatch():
    assert bump_jet("alpha", S(Fraction(1, 10)), 1).value.is_zero
    assert bump_jet("beta", S(Fraction(1, 2)), 1).value == 1
    assert bump_jet("gamma", S(0), 2).D(2) == 1
    with pytest.raises(ValueError):
        bump_jet("delta", S(0), 1)
    with pytest.raises(ValueError):
        bump_jet("alpha", S(0), 13)


def test_xi0_unit_region_and_origin():
    j = xi0_jet(Scalar.from_int(2, PREC), 3)
    assert j.value == -1 and j.D(1).is_zero
    assert xi0_jet(Scalar.one(PREC), 2).value == -1
    j = xi0_jet(Scalar.zero(PREC), 4)
    assert j.value.is_zero and j.D(3).is_zero
    with pytest.raises(ValueError):
        xi0_jet(Scalar.from_int(-1, PREC), 1)


def test_xi0_highland_plateau_value():
    # center of the slow plateau around 2^-3: value -2^-81, flat
    j = xi0_jet(Scalar.pow2(-3, PREC), 4)
    assert j.value == -Scalar.pow2(-81, PREC)
    for m in range(1, 5):
        assert j.D(m).is_zero


def test_xi0_central_third_plateau():
    # x = 0.4375 lies in block 1 where u_1 = v_1 = 1/2: value -1/2, flat
    j = xi0_jet(S(Fraction(7, 16)), 4)
    assert j.value == -Scalar.pow2(-1, PREC)
    for m in range(1, 5):
        assert j.D(m).is_zero
    # a genuine central-third point of block 4
    x = S(Fraction(3, 2) * Fraction(1, 32))
    j = xi0_jet(x, 3)
    assert j.value == -Scalar.pow2(-16, PREC)
    assert j.D(1).is_zero


def test_xi0_negative_everywhere_sampled():
    rng = random.Random(33)
    for _ in range(50):
        x = S(Fraction(rng.randint(1, 1 << 20), 1 << 20))
        if x.is_zero:
            continue
        assert xi0_jet(x, 0).value.sign == -1


def test_xi0_block_boundary_continuity():
    field = SergeraertField()
    eps = Scalar.pow2(-200, PREC)
    for n in (2, 3, 4):
        x = Scalar.pow2(-n, PREC)
        left = field.xi0_jet(x - eps, 0).value
        right = field.xi0_jet(x + eps, 0).value
        assert abs((left - right).as_fraction()) < Fraction(1, 2**150)
        # boundary value is the slow plateau value u_n on both sides
        assert field.xi0_jet(x, 0).value == -Scalar.pow2(-(n ** 4), PREC)


def test_block_and_region_lookup():
    field = SergeraertField()
    assert field.block_of(S(Fraction(3, 8))) == 1
    assert field.block_of(S(Fraction(1, 4))) == 1      # boundary joins block n-1
    assert field.block_of(Scalar.pow2(-5, PREC)) == 4
    assert field.block_of(S(Fraction(3, 128))) == 5
    r = field.region_at(S(Fraction(3, 8)))
    assert r.kind == "plateau" and r.speed == v_value(1)
    r = field.region_at(S(Fraction(5, 8)))
    assert r.n == 0 and r.kind == "transition"
    regs = field.regions(4)
    assert len(regs) == 5
    assert regs[0].x_lo == Fraction(1, 32) and regs[4].x_hi == Fraction(1, 16)
    assert regs[0].speed == u_value(5) and regs[2].speed == v_value(4)
    assert sum((r.width for r in regs), Fraction(0)) == Fraction(1, 32)


def test_transition_region_formula_matches_xi0():
    # |xi0| on a transition equals lo + (hi-lo)*s(zeta) with the stored affine zeta
    field = SergeraertField()
    rng = random.Random(34)
    for n in (0, 2, 4):
        for r in field.regions(n):
            if r.kind != "transition":
                continue
            for _ in range(6):
                xf = r.x_lo + (r.x_hi - r.x_lo) * Fraction(rng.randint(1, 63), 64)
                x = S(xf)
                z = Scalar.from_int(r.zeta_scale, PREC) * x + r.zeta_shift
                want = (Scalar.from_fraction(r.lo_speed, PREC)
                        + (Scalar.from_fraction(r.hi_speed, PREC)
                           - Scalar.from_fraction(r.lo_speed, PREC))
                        * step_jet(z, 0).value)
                got = -field.xi0_jet(x, 0).value
                assert abs((got - want).as_fraction()) < Fraction(1, 2**480)


def test_smoothness_proxy_decreasing():
    # max_{m<=4} sup |D^m xi0| over block n decreases for n >= 3
    field = SergeraertField()
    tops = []
    for n in (3, 4, 5):
        top = Scalar.zero(192)
        for r in field.regions(n):
            if r.kind != "transition":
                continue
            for i in range(33):
                xf = r.x_lo + (r.x_hi - r.x_lo) * Fraction(i, 32)
                j = field.xi0_jet(Scalar.from_fraction(xf, 192), 4)
                for m in range(5):
                    a = abs(j.D(m))
                    if a > top:
                        top = a
        tops.append(top)
    assert tops[0] > tops[1] > tops[2]


def test_gamma_norm_table_shape():
    tab = gamma_norm_table(3)
    assert len(tab) == 4
    # cumulative and positive
    assert tab[0] > 0
    for a, b in zip(tab, tab[1:]):
        assert b >= a
    # small amplitude profile: sup gamma around 0.006, well below 1
    assert tab[0].as_fraction() < Fraction(1, 64)
    assert tab[1].as_fraction() < 1


def test_xi0_c1_bound():
    b = xi0_c1_bound(grid=1 << 7)
    assert b > 1
    assert b.as_fraction() < 1000


def test_oscillation_statistic_bounded_for_exp_field():
    oracle = ExpFieldOracle()
    x = Scalar.from_fraction(Fraction(1, 50), 256)
    stat = oscillation_statistic(oracle, x, octaves=3, per_octave=8)
    assert stat >= 1
    assert stat.as_fraction() < 3  # bounded: no oscillation trend


def test_oscillation_statistic_single_point():
    oracle = ExpFieldOracle()
    x = Scalar.from_fraction(Fraction(1, 50), 256)
    stat = oscillation_statistic(oracle, x, octaves=1, per_octave=1)
    assert stat >= 1
