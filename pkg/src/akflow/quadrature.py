"""High-precision Gauss-Legendre quadrature with adaptive panel splitting.

Nodes and weights are computed once per (count, precision) pair by Newton
iteration on the Legendre polynomial, seeded from float estimates and
refined through staged precision doubling.  The adaptive integrator splits
panels until the two-half refinement agrees with the parent panel to a
caller-supplied relative tail, which keeps the local error proportional to
the local integral mass; integrands here are strictly positive, so the
panel errors cannot cancel against each other and the global relative
error is bounded by the tail times the panel count.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable

from .scalar import Scalar

DEFAULT_NODE_COUNT = 129

# extra working bits while generating nodes; final values are re-rounded
_NODE_GUARD = 64


def _legendre_pair(n: int, x: Scalar) -> tuple[Scalar, Scalar]:
    """Value and derivative of the degree-n Legendre polynomial at x."""
    prec = x.precision_bits
    p_prev = Scalar.one(prec)
    p = x
    for k in range(1, n):
        # (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
        p_next = (x * p * (2 * k + 1) - p_prev * k) / (k + 1)
        p_prev, p = p, p_next
    # (1 - x^2) P_n' = n (P_{n-1} - x P_n)
    dp = (p_prev - x * p) * n / (Scalar.one(prec) - x * x)
    return p, dp


@lru_cache(maxsize=8)
def gauss_legendre_nodes(count: int, precision_bits: int) -> tuple[tuple[Scalar, ...], tuple[Scalar, ...]]:
    """Nodes and weights for `count`-point Gauss-Legendre on [-1, 1].

    Returned nodes are strictly increasing; weights are positive and sum
    to 2 up to rounding at `precision_bits`.
    """
    if count < 2:
        raise ValueError("need at least 2 nodes")
    if precision_bits < 64:
        raise ValueError("precision too low for node generation")
    target = precision_bits + _NODE_GUARD

    stages = [64]
    while stages[-1] < target:
        stages.append(min(stages[-1] * 2, target))

    half = count // 2
    nodes_hi: list[Scalar] = []
    for i in range(half + (count % 2), 0, -1):
        seed = math.cos(math.pi * (i - 0.25) / (count + 0.5))
        x = Scalar.from_float(abs(seed), stages[0])
        for prec in stages:
            x = x.with_precision(prec)
            # a few Newton steps at each stage; quadratic convergence makes
            # two per doubling sufficient, three adds margin at the seed stage
            steps = 3 if prec == stages[0] else 2
            for _ in range(steps):
                p, dp = _legendre_pair(count, x)
                x = x - p / dp
        nodes_hi.append(x)
    # nodes_hi is increasing (seeds decrease i -> larger cos index ordering)
    nodes_hi.sort()
    if count % 2:
        # odd count: the smallest computed root is the origin up to rounding
        nodes_hi[0] = Scalar.zero(target)

    nodes: list[Scalar] = []
    weights: list[Scalar] = []
    for x in nodes_hi:
        _, dp = _legendre_pair(count, x)
        w = Scalar.from_int(2, target) / ((Scalar.one(target) - x * x) * dp * dp)
        nodes.append(x.with_precision(precision_bits))
        weights.append(w.with_precision(precision_bits))

    lo_nodes = [-x for x in reversed(nodes)]
    lo_weights = list(reversed(weights))
    if count % 2:
        lo_nodes = lo_nodes[:-1]
        lo_weights = lo_weights[:-1]
    return tuple(lo_nodes + nodes), tuple(lo_weights + weights)


def integrate_panel(
    f: Callable[[Scalar], Scalar],
    lo: Scalar,
    hi: Scalar,
    precision_bits: int,
    node_count: int = DEFAULT_NODE_COUNT,
) -> Scalar:
    """Single Gauss-Legendre panel over [lo, hi]."""
    nodes, weights = gauss_legendre_nodes(node_count, precision_bits)
    center = (lo + hi) * Scalar.pow2(-1, precision_bits)
    radius = (hi - lo) * Scalar.pow2(-1, precision_bits)
    total = Scalar.zero(precision_bits)
    for x, w in zip(nodes, weights):
        total = total + w * f(center + radius * x)
    return total * radius


class IntegrationError(ArithmeticError):
    pass


def integrate_adaptive(
    f: Callable[[Scalar], Scalar],
    lo: Scalar,
    hi: Scalar,
    precision_bits: int,
    tail_exponent: int,
    node_count: int = DEFAULT_NODE_COUNT,
    max_depth: int = 200,
    segments: list | None = None,
) -> Scalar:
    """Integrate f over [lo, hi] with panel splitting.

    A panel is accepted when refining it into two halves changes the result
    by at most 2^-tail_exponent relative to the refined mass.  Intended for
    positive integrands, where this gives a global relative error bound of
    the tail times the number of accepted panels.

    When `segments` is a list, each accepted half-panel is appended to it as
    (a, b, value) in ascending order of a; the values sum to the returned
    integral up to fold rounding, and each carries the same relative tail.
    """
    if hi < lo:
        raise ValueError("integration bounds out of order")
    if hi == lo:
        return Scalar.zero(precision_bits)
    tol = Scalar.pow2(-tail_exponent, precision_bits)

    def recurse(a: Scalar, b: Scalar, whole: Scalar, depth: int) -> Scalar:
        if depth > max_depth:
            raise IntegrationError(
                f"integration did not converge within depth {max_depth}"
            )
        mid = (a + b) * Scalar.pow2(-1, precision_bits)
        left = integrate_panel(f, a, mid, precision_bits, node_count)
        right = integrate_panel(f, mid, b, precision_bits, node_count)
        refined = left + right
        if abs(whole - refined) <= tol * (abs(left) + abs(right)):
            if segments is not None:
                segments.append((a, mid, left))
                segments.append((mid, b, right))
            return refined
        return recurse(a, mid, left, depth + 1) + recurse(mid, b, right, depth + 1)

    first = integrate_panel(f, lo, hi, precision_bits, node_count)
    return recurse(lo, hi, first, 0)
