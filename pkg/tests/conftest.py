"""Shared oracles for the test suite.

These deliberately avoid the code paths they are used to check: Bessel
ratios come from raw power series, branch roots from plain bisection on an
independently evaluated consistency function.
"""
import math

import pytest


def i0_series(r: float) -> float:
    """Modified Bessel I0 by its power series sum_k (r^2/4)^k / (k!)^2."""
    x = r * r / 4.0
    term, total = 1.0, 1.0
    for k in range(1, 200):
        term *= x / (k * k)
        total += term
        if term < 1e-18 * total:
            break
    return total


def i1_series(r: float) -> float:
    """Modified Bessel I1 = (r/2) sum_k (r^2/4)^k / (k! (k+1)!)."""
    x = r * r / 4.0
    term, total = 1.0, 1.0
    for k in range(1, 200):
        term *= x / (k * (k + 1))
        total += term
        if term < 1e-18 * total:
            break
    return 0.5 * r * total


def oracle_c(r: float, d: int) -> float:
    """Mean of omega_1 under the von Mises weight, evaluated independently:
    series ratio on the circle, the explicit coth(r) - 1/r on the sphere."""
    if r == 0.0:
        return 0.0
    if d == 2:
        return i1_series(r) / i0_series(r)
    if d == 3:
        if r > 30.0:
            return 1.0 / math.tanh(r) - 1.0 / r
        e2 = math.exp(-2.0 * r)
        return (1.0 + e2) / (1.0 - e2) - 1.0 / r
    raise ValueError("oracle only built for d in {2, 3}")


def bisect_branch(mu: float, d: int, iters: int = 80) -> float:
    """Positive root of mu c(L) = L by bisection (mu > d required).

    g(L) = mu c(L) - L is positive near 0 (slope mu/d - 1 > 0) and negative
    at L = mu (c < 1), so the bracket [1e-8, mu] is guaranteed.
    """
    assert mu > d
    lo, hi = 1e-8, mu
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mu * oracle_c(mid, d) - mid > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture(scope="session")
def branch_oracle():
    return bisect_branch
