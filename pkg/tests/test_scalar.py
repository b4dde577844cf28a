import random
from fractions import Fraction

import pytest

from akflow.scalar import (
    Scalar,
    exact_add,
    exact_mul_int,
    exact_sub,
    scalar_max,
    scalar_min,
)

from oracles import exp_fraction, nearest_dyadic


def rnd_fraction(rng, max_bits=200):
    num = rng.getrandbits(max_bits) - (1 << (max_bits - 1))
    den = rng.getrandbits(max_bits) | 1
    return Fraction(num, den)


def test_constructors_exact():
    assert Scalar.from_int(0).is_zero
    assert Scalar.from_int(12345).as_fraction() == 12345
    assert Scalar.pow2(-4096).as_fraction() == Fraction(1, 2**4096)
    assert Scalar.from_man_exp(5, -3).as_fraction() == Fraction(5, 8)
    big = (1 << 2500) + 12345
    assert Scalar.from_int(big).as_fraction() == big
    assert Scalar.from_float(1.5).as_fraction() == Fraction(3, 2)
    assert Scalar.from_float(2.0**-1060).as_fraction() == Fraction(1, 2**1060)


def test_from_fraction_rounding_matches_oracle():
    rng = random.Random(7)
    for _ in range(60):
        f = rnd_fraction(rng)
        for prec in (16, 53, 64, 333, 1024):
            got = Scalar.from_fraction(f, prec).as_fraction()
            assert got == nearest_dyadic(f, prec)


def test_from_fraction_directed():
    rng = random.Random(8)
    for _ in range(40):
        f = rnd_fraction(rng)
        lo = Scalar.from_fraction(f, 64, rnd="f").as_fraction()
        hi = Scalar.from_fraction(f, 64, rnd="c").as_fraction()
        assert lo <= f <= hi
        if lo != hi:
            assert hi - lo <= abs(f) * Fraction(1, 2**63)


def test_arithmetic_correctly_rounded():
    rng = random.Random(9)
    for _ in range(60):
        a = rnd_fraction(rng, 120)
        b = rnd_fraction(rng, 120)
        if b == 0:
            continue
        prec = rng.choice([64, 200, 512])
        sa = Scalar.from_fraction(a, prec)
        sb = Scalar.from_fraction(b, prec)
        fa, fb = sa.as_fraction(), sb.as_fraction()
        for op, exact in ((sa + sb, fa + fb), (sa - sb, fa - fb),
                          (sa * sb, fa * fb), (sa / sb, fa / fb)):
            assert op.as_fraction() == nearest_dyadic(exact, prec)


def test_exact_helpers_are_exact():
    a = Scalar.from_man_exp(3, 1290, 64)
    b = Scalar.from_man_exp(7, -2800, 64)
    s = exact_add(a, b)
    assert s.as_fraction() == a.as_fraction() + b.as_fraction()
    d = exact_sub(a, b)
    assert d.as_fraction() == a.as_fraction() - b.as_fraction()
    m = exact_mul_int(b, 12345678901234567890)
    assert m.as_fraction() == b.as_fraction() * 12345678901234567890


def test_int_arithmetic_coercion():
    x = Scalar.from_fraction(Fraction(1, 3), 256)
    assert (x * 3 + 1 - 1).as_fraction() == (3 * x).as_fraction()
    assert (1 / Scalar.from_int(4)).as_fraction() == Fraction(1, 4)


def test_comparisons_are_exact():
    a = Scalar.pow2(0) + Scalar.pow2(-4000, 4096)
    b = Scalar.one(4096)
    assert a > b and b < a and a != b and a >= b
    assert Scalar.from_int(5) == 5
    assert Scalar.from_int(5) <= 5
    huge = Scalar.from_int(1 << 2400)
    assert huge + Scalar.pow2(-100, 4096) > huge


def test_floor_ceil_huge():
    n = (1 << 1290) + 7
    x = Scalar.from_int(n) + Scalar.from_fraction(Fraction(1, 3), 2048)
    assert x.floor() == n
    assert x.ceil() == n + 1
    y = -x
    assert y.floor() == -n - 1
    assert y.ceil() == -n
    assert Scalar.from_int(n).floor() == n
    assert Scalar.from_int(n).to_int() == n


def test_shift_and_pow():
    x = Scalar.from_fraction(Fraction(5, 7), 128)
    assert x.shift(10).as_fraction() == x.as_fraction() * 1024
    assert x.shift(-9).as_fraction() == x.as_fraction() / 512
    assert (Scalar.from_int(3) ** 7).as_fraction() == 3**7


def test_hex_round_trip():
    rng = random.Random(10)
    cases = [Scalar.zero(), Scalar.one(), Scalar.from_int(-7),
             Scalar.pow2(-(1 << 13)), Scalar.pow2(1 << 13)]
    for _ in range(40):
        cases.append(Scalar.from_fraction(rnd_fraction(rng), 4096))
    for x in cases:
        h = x.to_hex()
        y = Scalar.from_hex(h)
        assert y == x
        assert y.to_hex() == h
    assert Scalar.zero().to_hex() == "+0x0.p+0"
    assert Scalar.one().to_hex() == "+0x1.p+0"
    assert Scalar.from_man_exp(-5, -3).to_hex() == "-0x5.p-3"


def test_hex_rejects_malformed():
    for bad in ["0x5.p-3", "+0x6.p-3", "+0x5.p3", "+0x5p-3", "-0x0.p+0",
                "+0x0.p+1", "+0X5.p-3", ""]:
        with pytest.raises(ValueError):
            Scalar.from_hex(bad)


def test_round_half_even():
    # 0b110000001 rounded to 8 bits ties to the even mantissa 0b11000000
    assert Scalar.from_int(385).with_precision(8).as_fraction() == 384
    # 0b110000011 ties upward to 0b11000010
    assert Scalar.from_int(387).with_precision(8).as_fraction() == 388


def test_exp_against_series_oracle():
    for f in (Fraction(1, 3), Fraction(-2, 7), Fraction(1), Fraction(-1, 64)):
        x = Scalar.from_fraction(f, 512)
        got = x.exp()
        want = exp_fraction(f, 300)
        err = abs(got.as_fraction() - want)
        assert err <= abs(want) * Fraction(1, 2**508)


def test_exp_log_round_trip():
    rng = random.Random(11)
    for _ in range(20):
        f = Fraction(rng.randint(1, 1000), rng.randint(1, 1000))
        x = Scalar.from_fraction(f, 700)
        back = x.exp().log()
        assert abs(back.as_fraction() - x.as_fraction()) <= abs(f) * Fraction(1, 2**690)


def test_exp_huge_negative_argument():
    # exponent range far beyond double floats
    x = Scalar.from_int(-20000, 256)
    y = x.exp()
    assert 0 < y.as_fraction() < Fraction(1, 2**28000)
    assert y.exp  # representable, operable
    assert (y * y).as_fraction() < Fraction(1, 2**57000)


def test_sqrt():
    assert Scalar.from_int(4).sqrt() == 2
    assert Scalar.from_int(1 << 600).sqrt() == Scalar.pow2(300)
    x = Scalar.from_fraction(Fraction(2, 3), 512)
    r = x.sqrt()
    assert abs((r * r).as_fraction() - x.as_fraction()) < Fraction(1, 2**508)
    with pytest.raises(ValueError):
        Scalar.from_int(-1).sqrt()


def test_log_domain():
    with pytest.raises(ValueError):
        Scalar.zero().log()
    with pytest.raises(ValueError):
        Scalar.from_int(-3).log()


def test_cmp_fraction():
    x = Scalar.from_fraction(Fraction(1, 3), 64)
    assert x.cmp_fraction(Fraction(1, 3)) in (-1, 1)  # 1/3 is not dyadic
    assert x.cmp_fraction(x.as_fraction()) == 0
    assert Scalar.from_int(2).cmp_fraction(Fraction(3, 2)) == 1
    assert Scalar.from_int(1).cmp_fraction(Fraction(3, 2)) == -1


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        Scalar.one() / Scalar.zero()


def test_min_max_sign_abs():
    a, b, c = Scalar.from_int(-3), Scalar.zero(), Scalar.from_int(9)
    assert scalar_max(a, b, c) == c
    assert scalar_min(a, b, c) == a
    assert a.sign == -1 and b.sign == 0 and c.sign == 1
    assert abs(a) == 3 and (-a) == 3


def test_precision_bookkeeping():
    a = Scalar.from_fraction(Fraction(1, 3), 100)
    b = Scalar.from_fraction(Fraction(1, 7), 300)
    assert (a + b).precision_bits == 300
    assert a.mantissa.bit_length() <= 100
    assert a.with_precision(50).mantissa.bit_length() <= 50
    assert Scalar.from_int((1 << 90) + 1, 64).mantissa.bit_length() <= 64


def test_hashable_and_float():
    d = {Scalar.from_int(3): "x"}
    assert d[Scalar.from_int(3)] == "x"
    assert float(Scalar.from_fraction(Fraction(1, 2), 64)) == 0.5
    assert float(Scalar.pow2(1 << 14)) == float("inf")
