"""A concrete Yamada-Watanabe approximation of ``|x|``.

``psi`` is a tent in log-scale on ``[eps/theta, eps]``::

    psi(u) = 2 / (u ln theta) * tri(s),   s = (ln u - ln(eps/theta)) / ln theta,
    tri(s) = max(0, 1 - |2s - 1|)

Under ``u = (eps/theta) theta**s`` the measure ``du / u`` becomes
``ln theta ds``, which gives closed forms for ``U'`` and ``U``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

__all__ = ["YWParams", "psi", "U", "U_prime", "U_double_prime", "psi_integral", "property_violations"]


@dataclass(frozen=True)
class YWParams:
    theta: float
    eps: float

    def __post_init__(self):
        if not self.theta > 1:
            raise ValueError(f"theta must exceed 1, got {self.theta}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")

    @property
    def c(self) -> float:
        return math.log(self.theta)

    @property
    def lower(self) -> float:
        return self.eps / self.theta


def _s(params: YWParams, u):
    with np.errstate(divide="ignore"):
        return (np.log(u) - math.log(params.lower)) / params.c


def psi(params: YWParams, u):
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("psi is defined for u >= 0")
    s = _s(params, u)
    tri = np.maximum(0.0, 1.0 - np.abs(2.0 * s - 1.0))
    inside = (u >= params.lower) & (u <= params.eps)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(inside, 2.0 / (u * params.c) * tri, 0.0)
    return float(out) if out.ndim == 0 else out


def _g(s):
    """Mass of psi below the log-position ``s`` (``U'`` on the positive axis)."""
    s = np.clip(s, 0.0, 1.0)
    return np.where(s <= 0.5, 2.0 * s * s, 4.0 * s - 2.0 * s * s - 1.0)


def U_prime(params: YWParams, x):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    with np.errstate(divide="ignore"):
        g = np.where(ax <= params.lower, 0.0, _g(_s(params, np.maximum(ax, params.lower))))
    out = np.sign(x) * g
    return float(out) if out.ndim == 0 else out


def U_double_prime(params: YWParams, x):
    return psi(params, np.abs(np.asarray(x, dtype=float)))


def _poly_exp_antiderivative(coeffs, c, s):
    """Antiderivative of ``(a0 + a1 s + a2 s^2) e^{cs}``."""
    a0, a1, a2 = coeffs
    e = np.exp(c * s)
    return e * (a0 / c + a1 * (s / c - 1 / c**2) + a2 * (s * s / c - 2 * s / c**2 + 2 / c**3))


def _U_pos(params: YWParams, y):
    """``U`` on ``y >= 0`` in closed form."""
    c, a = params.c, params.lower
    y = np.asarray(y, dtype=float)
    s = np.clip(_s(params, np.maximum(y, a)), 0.0, 1.0)
    first = (0.0, 0.0, 2.0)      # 2 s^2 on [0, 1/2]
    second = (-1.0, 4.0, -2.0)   # 4s - 2s^2 - 1 on [1/2, 1]
    F = lambda co, t: _poly_exp_antiderivative(co, c, t)
    lo = np.minimum(s, 0.5)
    part1 = F(first, lo) - F(first, 0.0)
    hi = np.maximum(s, 0.5)
    part2 = np.where(s > 0.5, F(second, hi) - F(second, 0.5), 0.0)
    # dy = a c e^{cs} ds
    val = a * c * (part1 + part2)
    val = np.where(y <= a, 0.0, val)
    return np.where(y > params.eps, val + (y - params.eps), val)


def U(params: YWParams, x):
    out = _U_pos(params, np.abs(np.asarray(x, dtype=float)))
    return float(out) if np.ndim(out) == 0 else out


def psi_integral(params: YWParams) -> float:
    """``int psi`` over its support by adaptive quadrature in log-coordinates."""
    val, _ = integrate.quad(lambda s: params.c * params.lower * math.exp(params.c * s) *
                            float(psi(params, params.lower * math.exp(params.c * s))),
                            0.0, 1.0, points=[0.5], epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def property_violations(params: YWParams, n: int = 10_000, seed: int = 0, span: float = 10.0) -> dict:
    """Largest violations of the four defining inequalities on samples in ``[-span eps, span eps]``."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-span * params.eps, span * params.eps, n)
    x = np.concatenate([x, [params.lower, params.eps, -params.eps, params.eps * 2]])
    ax = np.abs(x)
    up = U_prime(params, x)
    upp = U_double_prime(params, x)
    u = U(params, x)
    with np.errstate(divide="ignore"):
        cap = np.where(ax > 0, 2.0 / (ax * params.c), np.inf)
    return {
        "psi_integral_error": abs(psi_integral(params) - 1.0),
        "U_prime_range": float(np.max(np.maximum(np.abs(up) - 1.0, 0.0))),
        "U_prime_negative": float(np.max(np.maximum(-np.sign(x) * up, 0.0))),
        "U_prime_linear": float(np.max(np.maximum(np.abs(up) - params.theta / params.eps * ax, 0.0))),
        "U_double_prime_cap": float(np.max(np.maximum(upp - cap, 0.0))),
        "abs_below_eps_plus_U": float(np.max(np.maximum(ax - params.eps - u, 0.0))),
    }
