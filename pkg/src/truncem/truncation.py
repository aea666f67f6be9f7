"""Truncation pair ``h(w) = L w**upsilon``, ``Gamma(delta) = delta**-epsilon`` and the clamp map."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelSpec

__all__ = [
    "TruncationPolicy",
    "TruncationDomainError",
    "default_policy",
    "cubic_policy",
    "gamma",
    "truncation_bound",
    "truncate",
    "eval_truncated_drift",
    "eval_truncated_diffusion",
    "hypothesis_holds",
]


class TruncationDomainError(ValueError):
    """Step size too large for the truncation policy."""


@dataclass(frozen=True)
class TruncationPolicy:
    """Power-law truncation pair.

    ``strict`` enforces ``h^{-1}(Gamma(delta)) >= 1`` (``h`` lives on
    ``[1, inf)``).  With ``strict=False`` the power law is extrapolated and
    the clamp radius may drop below 1, which the coarse step sizes of the
    reproduction experiments need.
    """

    L: float = 1.0
    upsilon: float = 1.0
    epsilon: float = 0.25
    L0: float = 1.0
    strict: bool = True

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")
        if self.upsilon < 1:
            raise ValueError(f"upsilon must be >= 1, got {self.upsilon}")
        if not 0 < self.epsilon <= 0.25:
            raise ValueError(f"epsilon must lie in (0, 1/4], got {self.epsilon}")
        if not self.L0 > 0:
            raise ValueError(f"L0 must be positive, got {self.L0}")

    def h(self, w):
        return self.L * np.asarray(w, dtype=float) ** self.upsilon

    def h_inv(self, y):
        return (np.asarray(y, dtype=float) / self.L) ** (1.0 / self.upsilon)

    def gamma_constraint_holds(self, delta: float) -> bool:
        return delta ** 0.25 * gamma(self, delta) <= self.L0 * (1 + 1e-12)


def default_policy(model: ModelSpec, strict: bool = False) -> TruncationPolicy:
    """``L = L1 + 2 L3 + |alpha1(0)| + |alpha2(0)| + |beta(0)|``, ``upsilon = max(l1, l2, l3) + 1``."""
    L = (model.L1 + 2 * model.L3 + abs(float(model.alpha1(0.0)))
         + abs(float(model.alpha2(0.0))) + abs(float(model.beta(0.0))))
    if not np.isfinite(L) or L <= 0:
        L = 1.0
    upsilon = max(model.l1, model.l2, model.l3) + 1
    return TruncationPolicy(L=float(L), upsilon=float(upsilon), epsilon=0.25, L0=1.0, strict=strict)


def cubic_policy(strict: bool = False) -> TruncationPolicy:
    """``h(w) = 8 w**3``, ``Gamma(delta) = delta**(-1/4)``."""
    return TruncationPolicy(L=8.0, upsilon=3.0, epsilon=0.25, L0=1.0, strict=strict)


def gamma(policy: TruncationPolicy, delta: float) -> float:
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    return delta ** -policy.epsilon


def truncation_bound(policy: TruncationPolicy, delta: float) -> float:
    """Clamp radius ``h^{-1}(Gamma(delta)) = (Gamma(delta) / L)**(1/upsilon)``."""
    g = gamma(policy, delta)
    if policy.strict and g < policy.L:
        raise TruncationDomainError(
            f"step size too large for truncation policy: Gamma({delta:g})={g:g} < h(1)={policy.L:g}")
    return float((g / policy.L) ** (1.0 / policy.upsilon))


def truncate(x, bound: float):
    """``(|x| ^ bound) * x/|x|`` with ``0/|0| = 0``: a clamp to ``[-bound, bound]``."""
    if not bound > 0:
        raise ValueError("bound must be positive")
    out = np.clip(x, -bound, bound)
    return float(out) if np.ndim(out) == 0 else out


def eval_truncated_drift(model: ModelSpec, policy: TruncationPolicy, delta: float, m):
    """``alpha1(clamp(m1)) + alpha2(clamp(m1)) + alpha3(m)``; ``alpha3`` is never clamped."""
    m = np.asarray(m, dtype=float)
    if len(m) != model.r:
        raise ValueError(f"expected {model.r} delay arguments, got {len(m)}")
    xt = truncate(m[0], truncation_bound(policy, delta))
    return model.alpha1(xt) + model.alpha2(xt) + model.alpha3(m)


def eval_truncated_diffusion(model: ModelSpec, policy: TruncationPolicy, delta: float, m1):
    return model.beta(truncate(m1, truncation_bound(policy, delta)))


def hypothesis_holds(policy: TruncationPolicy, delta: float) -> bool:
    """Whether ``Gamma(delta) >= h((delta**(1/2) Gamma(delta))**-1)``."""
    g = gamma(policy, delta)
    return bool(g >= policy.h(1.0 / (delta ** 0.5 * g)))
