import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from truncem.yamada_watanabe import YWParams, U, U_double_prime, U_prime, psi, psi_integral, property_violations

PARAMS = [YWParams(t, e) for t in (2.0, 10.0, 2 ** 1.5) for e in (0.1, 1e-3)]


def _quad_U_prime(p, y):
    """``int_0^y psi`` by direct quadrature (oracle)."""
    if y <= p.lower:
        return 0.0
    hi = min(y, p.eps)
    mid = math.sqrt(p.eps * p.lower)
    pts = [mid] if p.lower < mid < hi else None
    return integrate.quad(lambda u: psi(p, u), p.lower, hi, points=pts, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def _quad_U(p, y):
    """``int_0^y U'`` by quadrature over the oracle derivative."""
    hi = min(y, p.eps)
    val = 0.0
    if hi > p.lower:
        val = integrate.quad(lambda v: _quad_U_prime(p, v), p.lower, hi, epsabs=1e-15, epsrel=1e-12, limit=200)[0]
    return val + max(y - p.eps, 0.0)


def test_params_validation():
    with pytest.raises(ValueError):
        YWParams(1.0, 0.1)
    with pytest.raises(ValueError):
        YWParams(2.0, 1.0)


def test_psi_support():
    p = YWParams(10.0, 0.1)
    assert psi(p, 0.0) == 0.0
    assert psi(p, 0.005) == 0.0
    assert psi(p, 0.2) == 0.0
    with pytest.raises(ValueError):
        psi(p, -1.0)


def test_psi_peak_at_log_midpoint():
    p = YWParams(10.0, 0.1)
    u = math.sqrt(p.eps ** 2 / p.theta)
    assert psi(p, u) == pytest.approx(2 / (u * math.log(10.0)), rel=1e-13)


@pytest.mark.parametrize("p", PARAMS)
def test_psi_integrates_to_one(p):
    assert abs(psi_integral(p) - 1.0) <= 1e-10
    direct = integrate.quad(lambda u: psi(p, u), p.lower, p.eps, points=[math.sqrt(p.eps * p.lower)],
                            epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    assert abs(direct - 1.0) <= 1e-10


@pytest.mark.parametrize("p", PARAMS)
def test_U_prime_against_quadrature(p):
    for y in np.linspace(0, 1.5 * p.eps, 23):
        assert U_prime(p, y) == pytest.approx(_quad_U_prime(p, y), abs=1e-11)
        assert U_prime(p, -y) == pytest.approx(-_quad_U_prime(p, y), abs=1e-11)


@pytest.mark.parametrize("p", [PARAMS[0], PARAMS[3]])
def test_U_against_quadrature(p):
    for y in np.linspace(0, 3 * p.eps, 9):
        assert U(p, y) == pytest.approx(_quad_U(p, y), abs=1e-11)


def test_below_support_zero():
    p = YWParams(10.0, 0.1)
    for x in (0.0, 0.005, -0.01):
        assert U(p, x) == 0.0 and U_prime(p, x) == 0.0


def test_full_mass_beyond_eps():
    p = YWParams(2.0, 0.1)
    assert U_prime(p, 0.1) == pytest.approx(1.0, abs=1e-15)
    assert U_prime(p, 5.0) == 1.0
    assert U_prime(p, -5.0) == -1.0


def test_U_at_two_eps():
    p = YWParams(2.0, 0.1)
    assert U(p, 0.2) >= 0.2 - 0.1 - 1e-12


def test_U_double_prime_is_psi():
    p = YWParams(10.0, 0.01)
    x = np.linspace(-0.02, 0.02, 101)
    np.testing.assert_array_equal(U_double_prime(p, x), psi(p, np.abs(x)))


@pytest.mark.parametrize("p", PARAMS)
def test_property_suite(p):
    v = property_violations(p, 10_000, 0)
    assert max(v.values()) <= 1e-10, v


def test_property_suite_step_dependent_theta():
    p = YWParams((2.0 ** -12) ** (-1 / 8), 1e-3)
    assert max(property_violations(p, 10_000, 1).values()) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 1, allow_nan=False), st.floats(-1, 1, allow_nan=False))
def test_U_even_monotone_convex(x, y):
    p = YWParams(10.0, 0.1)
    assert U(p, x) == U(p, -x)
    a, b = sorted((abs(x), abs(y)))
    assert U(p, a) <= U(p, b) + 1e-15
    assert U_prime(p, a) <= U_prime(p, b) + 1e-15
    # convexity on [0, inf): chord above graph at midpoint
    assert U(p, (a + b) / 2) <= (U(p, a) + U(p, b)) / 2 + 1e-15
