import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from truncem.model import ModelSpec, builtin_multi_delay, builtin_vix32, builtin_vq2
from truncem.truncation import (TruncationDomainError, TruncationPolicy, default_policy,
                                eval_truncated_diffusion, eval_truncated_drift, gamma,
                                hypothesis_holds, cubic_policy, truncate, truncation_bound)

reals = st.floats(-1e6, 1e6, allow_nan=False)
bounds = st.floats(1e-3, 1e3)


def test_default_policy_vq2():
    pol = default_policy(builtin_vq2())
    assert pol.upsilon == 3
    assert pol.L == 3 + 2 * 13
    assert (pol.epsilon, pol.L0) == (0.25, 1.0)


def test_default_policy_degenerate_falls_back():
    zero = ModelSpec("zero", lambda x: 0 * x, lambda x: 0 * x, lambda m: 0.0 * m[0], lambda x: 0 * x,
                     (0.0,), lambda t: 0.0, L1=0.0, L3=0.0)
    assert default_policy(zero).L == 1.0


def test_cubic_choice_representable():
    pol = cubic_policy()
    assert pol.h(2.0) == 64.0
    assert (pol.L, pol.upsilon) == (8.0, 3.0)


@pytest.mark.parametrize("delta,expected", [(2.0 ** -12, 8.0), (1.0, 1.0), (2.0 ** -4, 2.0)])
def test_gamma(delta, expected):
    assert gamma(TruncationPolicy(epsilon=0.25), delta) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("delta", [0.0, -0.1, 1.5])
def test_gamma_domain(delta):
    with pytest.raises(ValueError):
        gamma(TruncationPolicy(), delta)


def test_truncation_bound_cubic_values():
    pol = cubic_policy()
    assert truncation_bound(pol, 2.0 ** -12) == pytest.approx(1.0, rel=1e-14)
    assert truncation_bound(pol, 2.0 ** -24) == pytest.approx(2.0, rel=1e-14)
    for k in range(9, 14):
        d = 2.0 ** -k
        assert truncation_bound(pol, d) == pytest.approx(d ** (-1 / 12) / 2, rel=1e-14)


def test_truncation_bound_identity_h():
    pol = TruncationPolicy(L=1.0, upsilon=1.0, epsilon=0.2)
    assert truncation_bound(pol, 0.01) == pytest.approx(0.01 ** -0.2)


def test_strict_policy_rejects_coarse_step():
    pol = dataclasses.replace(cubic_policy(), strict=True)
    with pytest.raises(TruncationDomainError, match="step size too large"):
        truncation_bound(pol, 2.0 ** -9)
    assert truncation_bound(pol, 2.0 ** -12) == pytest.approx(1.0)


@pytest.mark.parametrize("x,b,expected", [(0.0, 1.0, 0.0), (-0.5, 1.0, -0.5), (3.0, 1.0, 1.0), (-3.0, 1.0, -1.0)])
def test_truncate(x, b, expected):
    assert truncate(x, b) == expected


@given(reals, bounds)
def test_truncate_idempotent_and_bounded(x, b):
    y = truncate(x, b)
    assert abs(y) <= b
    assert truncate(y, b) == y


@given(reals, reals, bounds)
def test_truncate_non_expansive(x, y, b):
    assert abs(truncate(x, b) - truncate(y, b)) <= abs(x - y)


def test_bound_monotone_and_unbounded():
    pol = cubic_policy()
    ds = 2.0 ** -np.arange(1, 60)
    b = np.array([truncation_bound(pol, d) for d in ds])
    assert np.all(np.diff(b) > 0)
    assert b[-1] == pytest.approx(2.0 ** (59 / 12) / 2, rel=1e-14)


def test_gamma_constraint():
    pol = TruncationPolicy(epsilon=0.25, L0=1.0)
    assert all(pol.gamma_constraint_holds(d) for d in np.linspace(1e-9, 1, 1000))
    assert all(TruncationPolicy(epsilon=0.1).gamma_constraint_holds(d) for d in np.linspace(1e-9, 1, 1000))


def _vq2_bound1():
    # L = 8 * 2^{-1/4 * 0} ... choose delta with bound exactly 1: delta = 2^-12 under h = 8 w^3
    return builtin_vq2(), cubic_policy(), 2.0 ** -12


def test_truncated_drift_hand_value():
    m, pol, d = _vq2_bound1()
    # alpha1(1) + alpha2(1) + alpha3(2, 0, 0) = -1 - 7 + 4
    assert eval_truncated_drift(m, pol, d, [2.0, 0.0, 0.0]) == pytest.approx(-4.0, abs=1e-12)


def test_truncated_drift_identity_inside_ball():
    m, pol, d = _vq2_bound1()
    v = [0.3, -2.0, 5.0]
    assert eval_truncated_drift(m, pol, d, v) == m.drift(v)


def test_truncated_drift_pure_cubic():
    m = builtin_multi_delay(1)
    assert (m.alpha2(truncate(2.0, 1.0))) == -4.0


def test_truncated_diffusion():
    m, pol, d = _vq2_bound1()
    assert eval_truncated_diffusion(m, pol, d, 4.0) == pytest.approx(1.0)
    assert eval_truncated_diffusion(m, pol, d, 0.0) == m.beta(0.0)
    assert eval_truncated_diffusion(m, pol, d, -0.25) == pytest.approx(0.125, rel=1e-15)


def test_hypothesis_check_reports_bool():
    pol = cubic_policy()
    assert hypothesis_holds(pol, 2.0 ** -12) in (True, False)
    # h((delta^{1/4})^{-1}) = 8 delta^{-3/4} > delta^{-1/4} for every delta < 1
    assert not hypothesis_holds(pol, 2.0 ** -12)
    assert hypothesis_holds(TruncationPolicy(L=0.5, upsilon=1.0, epsilon=0.25), 0.5)


@pytest.mark.parametrize("factory", [builtin_vq2, builtin_vix32, lambda: builtin_multi_delay(4)])
def test_truncated_coefficients_capped_by_gamma(factory):
    m = factory()
    pol = default_policy(m)
    rng = np.random.default_rng(5)
    x = np.concatenate([rng.standard_cauchy(20_000) * 10, rng.uniform(-3, 3, 20_000)])
    for k in range(4, 14):
        d = 2.0 ** -k
        xt = np.clip(x, -truncation_bound(pol, d), truncation_bound(pol, d))
        g = gamma(pol, d)
        worst = max(np.max(np.abs(m.alpha1(xt))), np.max(np.abs(m.alpha2(xt))), np.max(np.abs(m.beta(xt))))
        assert worst <= g


def test_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(epsilon=0.3)
    with pytest.raises(ValueError):
        TruncationPolicy(L=0.0)
    with pytest.raises(ValueError):
        TruncationPolicy(upsilon=0.5)
