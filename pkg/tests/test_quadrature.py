from fractions import Fraction

import pytest

from akflow.basefield import step_jet
from akflow.quadrature import (
    IntegrationError,
    gauss_legendre_nodes,
    integrate_adaptive,
    integrate_panel,
)
from akflow.scalar import Scalar

PREC = 512


def test_nodes_basic_invariants():
    nodes, weights = gauss_legendre_nodes(129, PREC)
    assert len(nodes) == len(weights) == 129
    for a, b in zip(nodes, nodes[1:]):
        assert a < b
    assert nodes[64].is_zero  # odd count: central node at origin
    for x, y in zip(nodes, reversed(nodes)):
        assert abs((x + y).as_fraction()) < Fraction(1, 2**500)
    for w in weights:
        assert w.sign == 1
    total = Scalar.zero(PREC)
    for w in weights:
        total = total + w
    assert abs((total - 2).as_fraction()) < Fraction(1, 2**495)


def test_nodes_small_count_even():
    nodes, weights = gauss_legendre_nodes(2, PREC)
    # classical 2-point rule: +-1/sqrt(3), weights 1
    want = (Scalar.from_int(1, PREC) / 3).sqrt()
    assert abs((nodes[1] - want).as_fraction()) < Fraction(1, 2**500)
    assert abs((weights[0] - 1).as_fraction()) < Fraction(1, 2**500)


def test_polynomial_exactness_high_degree():
    # 129 nodes integrate degree <= 257 exactly
    nodes, weights = gauss_legendre_nodes(129, PREC)
    for k in (3, 100, 256, 257):
        total = Scalar.zero(PREC)
        for x, w in zip(nodes, weights):
            total = total + w * x**k
        want = Fraction(0) if k % 2 else Fraction(2, k + 1)
        assert abs(total.as_fraction() - want) < Fraction(1, 2**490)


def test_panel_log_two():
    f = lambda x: Scalar.one(PREC) / (x + 1)
    got = integrate_panel(f, Scalar.zero(PREC), Scalar.one(PREC), PREC)
    want = Scalar.from_int(2, PREC).log()
    assert abs((got - want).as_fraction()) < Fraction(1, 2**400)


def test_adaptive_log_two_tight():
    f = lambda x: Scalar.one(PREC) / x
    got = integrate_adaptive(f, Scalar.one(PREC), Scalar.from_int(2, PREC), PREC, 480)
    want = Scalar.from_int(2, PREC).log()
    assert abs((got - want).as_fraction()) < Fraction(1, 2**470)


def test_adaptive_flat_step_symmetry():
    # integral of the smoothed step over [0,1] is exactly 1/2 by symmetry
    f = lambda x: step_jet(x, 0).value
    got = integrate_adaptive(f, Scalar.zero(PREC), Scalar.one(PREC), PREC, 400)
    assert abs(got.as_fraction() - Fraction(1, 2)) < Fraction(1, 2**390)


def test_adaptive_empty_and_bad_interval():
    f = lambda x: x
    z = integrate_adaptive(f, Scalar.one(PREC), Scalar.one(PREC), PREC, 100)
    assert z.is_zero
    with pytest.raises(ValueError):
        integrate_adaptive(f, Scalar.one(PREC), Scalar.zero(PREC), PREC, 100)


def test_adaptive_depth_guard():
    # |x|^(1/2)-like kink forces subdivision; depth 1 cannot satisfy a tight tail
    third = Scalar.from_fraction(Fraction(1, 3), PREC)
    f = lambda x: abs(x - third).sqrt() if not (x - third).is_zero else Scalar.zero(PREC)
    with pytest.raises(IntegrationError):
        integrate_adaptive(f, Scalar.zero(PREC), Scalar.one(PREC), PREC, 200, max_depth=1)


def test_node_cache_identity():
    a = gauss_legendre_nodes(129, PREC)
    b = gauss_legendre_nodes(129, PREC)
    assert a is b
