"""Multiple-delay SDE models ``dz = alpha(z(t), z(t-tau_2), ..., z(t-tau_r)) dt + beta(z(t)) dB``.

The drift is kept decomposed as ``alpha1(m1) + alpha2(m1) + alpha3(m)``:
``alpha1`` is the Hoelder, non-increasing part, ``alpha2`` the one-sided
Lipschitz superlinear part and ``alpha3`` the globally Lipschitz part that
sees the delayed states.  Coefficient callables must accept numpy arrays;
``alpha3`` receives a sequence ``m`` of length ``r`` (current state first).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .powerlaw import PowerLawCoefficients, PowerTerm

__all__ = [
    "ModelSpec",
    "AssumptionRecord",
    "AssumptionReport",
    "builtin_vix32",
    "builtin_vq2",
    "builtin_multi_delay",
    "builtin_pure_cubic",
    "from_powerlaw",
    "custom_powerlaw",
    "model_by_name",
    "check_assumptions",
]


@dataclass(frozen=True)
class ModelSpec:
    name: str
    alpha1: Callable
    alpha2: Callable
    alpha3: Callable
    beta: Callable
    delays: tuple[float, ...]
    xi: Callable
    gamma_xi: float = 1.0
    eta: float = 0.5
    sigma: float = 0.5
    l1: float = 1.0
    l2: float = 1.0
    l3: float = 1.0
    p_check: float = 2.0
    L1: float = 1.0
    L2: float = 1.0
    L3: float = 1.0
    L4: float = 1.0
    powerlaw: Optional[PowerLawCoefficients] = field(default=None, compare=False)

    def __post_init__(self):
        delays = tuple(float(d) for d in self.delays)
        object.__setattr__(self, "delays", delays)
        if not delays or delays[0] != 0.0:
            raise ValueError("delays must start with 0")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("delays must be strictly increasing")
        if not 0 < self.eta < 1:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if not 0.5 <= self.sigma < 1:
            raise ValueError(f"sigma must lie in [1/2, 1), got {self.sigma}")
        if not 0 < self.gamma_xi <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma_xi}")
        if min(self.l1, self.l2) < 1 or self.l3 < 0:
            raise ValueError("l1, l2 must be >= 1 and l3 >= 0")
        if self.p_check < 2:
            raise ValueError("p_check must be >= 2")
        if self.powerlaw is not None and len(self.powerlaw.alpha3_weights) != len(delays):
            raise ValueError("alpha3 weights must match the number of delays")
        try:
            out = self.alpha3(np.zeros(len(delays)))
        except (TypeError, ValueError, IndexError) as exc:
            raise ValueError(f"alpha3 must accept exactly r={len(delays)} arguments") from exc
        if np.ndim(out) != 0:
            raise ValueError("alpha3 must return a scalar for a length-r vector")

    @property
    def r(self) -> int:
        return len(self.delays)

    @property
    def tau(self) -> float:
        return self.delays[-1]

    def drift(self, m) -> float:
        """Untruncated drift at ``m = (m1, ..., m_r)``."""
        m = np.asarray(m, dtype=float)
        return self.alpha1(m[0]) + self.alpha2(m[0]) + self.alpha3(m)

    def diffusion(self, x):
        return self.beta(x)


def from_powerlaw(name, coeffs: PowerLawCoefficients, delays, xi, **meta) -> ModelSpec:
    a1, a2, a3, b = coeffs.make_callables()
    return ModelSpec(name=name, alpha1=a1, alpha2=a2, alpha3=a3, beta=b,
                     delays=tuple(delays), xi=xi, powerlaw=coeffs, **meta)


def _constant(c: float) -> Callable:
    def xi(t):
        return np.full(np.shape(t), float(c)) if np.ndim(t) else float(c)
    return xi


def builtin_vix32(c4: float = 2.0, c5: float = -3.0, lambda_star: float = 1.0,
                  k: float = 1.0, v0: float = 1.0) -> ModelSpec:
    """Risk-neutral 3/2 volatility model, ``V**2`` taken as ``V|V|``."""
    if k == 0:
        raise ValueError("k must be non-zero")
    coeffs = PowerLawCoefficients(
        alpha1=(PowerTerm(-lambda_star * k, 1.5, odd=True),),
        alpha2=(PowerTerm(c4, 1.0, odd=True), PowerTerm(c5, 2.0, odd=True)),
        beta=(PowerTerm(k, 1.5),),
        alpha3_weights=(0.0,),
    )
    # one-sided constant of c4*v + c5*v|v| is max(c4, 0) when c5 <= 0
    L1 = max(abs(c4), 1.5 * abs(lambda_star * k), 1.0)
    L3 = max(abs(c4) + 2 * abs(c5), 1.5 * abs(k), 1.0)
    L2 = max(abs(c4), 1.0) if c5 + 0.5 * k * k <= 0 else float("inf")
    return from_powerlaw("vix32", coeffs, (0.0,), _constant(v0), gamma_xi=1.0,
                         eta=0.5, sigma=0.5, l1=1, l2=1, l3=1, p_check=2.0,
                         L1=L1, L2=L2, L3=L3, L4=1.0)


def _vq2_xi(t):
    return np.sqrt(np.abs(t)) + 2.0


def builtin_vq2() -> ModelSpec:
    """Scalar two-delay model with a 3/2 diffusion and Hoelder drift part."""
    coeffs = PowerLawCoefficients(
        alpha1=(PowerTerm(-1.0, 1.5, odd=True),),
        alpha2=(PowerTerm(-3.0, 2.0, odd=True), PowerTerm(-4.0, 3.0, odd=True)),
        beta=(PowerTerm(1.0, 1.5),),
        alpha3_weights=(2.0, 3.0, 1.0),
    )
    return from_powerlaw("vq2", coeffs, (0.0, 0.25, 1.0), _vq2_xi, gamma_xi=0.5,
                         eta=0.5, sigma=0.5, l1=1, l2=2, l3=1, p_check=2.0,
                         L1=3.0, L2=1.0, L3=13.0, L4=1.0)


def builtin_multi_delay(J: int) -> ModelSpec:
    """``dz = (-4z^3 + z + sum_j z(t - j/512)) dt + |z|^{1/2} dB`` with ``J`` delays."""
    if int(J) != J or J < 1:
        raise ValueError(f"J must be a positive integer, got {J}")
    J = int(J)
    step = 2.0 ** -9
    coeffs = PowerLawCoefficients(
        alpha1=(),
        alpha2=(PowerTerm(-4.0, 3.0, odd=True),),
        beta=(PowerTerm(1.0, 0.5),),
        alpha3_weights=(1.0,) * (J + 1),
    )
    delays = tuple(j * step for j in range(J + 1))
    return from_powerlaw(f"mul{J}", coeffs, delays, _constant(1.0), gamma_xi=1.0,
                         eta=0.5, sigma=0.5, l1=1, l2=2, l3=1, p_check=2.0,
                         L1=1.0, L2=1.0, L3=12.0, L4=1.0)


def builtin_pure_cubic(xi0: float = 2.0, noise: float = 1.0) -> ModelSpec:
    """``dz = -4 z^3 dt + noise |z|^{1/2} dB`` with constant history ``xi0``."""
    beta = (PowerTerm(noise, 0.5),) if noise else ()
    coeffs = PowerLawCoefficients(alpha1=(), alpha2=(PowerTerm(-4.0, 3.0, odd=True),),
                                  beta=beta, alpha3_weights=(0.0,))
    return from_powerlaw("cubic", coeffs, (0.0,), _constant(xi0), gamma_xi=1.0,
                         eta=0.5, sigma=0.5, l1=1, l2=2, l3=1, p_check=2.0,
                         L1=1.0, L2=max(abs(noise), 1.0), L3=12.0, L4=1.0)


_META_KEYS = ("gamma_xi", "eta", "sigma", "l1", "l2", "l3", "p_check", "L1", "L2", "L3", "L4")


def custom_powerlaw(alpha1=(), alpha2=(), beta=(), weights=None, delays=(0.0,), xi=1.0,
                    name="powerlaw", **meta) -> ModelSpec:
    """Model from term lists ``[coef, exponent]`` or ``[coef, exponent, odd]`` and a constant history."""
    unknown = set(meta) - set(_META_KEYS)
    if unknown:
        raise ValueError(f"unknown model parameters {sorted(unknown)}")

    def terms(rows):
        return tuple(PowerTerm(float(r[0]), float(r[1]), bool(r[2]) if len(r) > 2 else False) for r in rows)

    delays = tuple(float(d) for d in delays)
    w = tuple(float(x) for x in weights) if weights is not None else (0.0,) * len(delays)
    coeffs = PowerLawCoefficients(terms(alpha1), terms(alpha2), terms(beta), w)
    return from_powerlaw(name, coeffs, delays, _constant(float(xi)), **meta)


_MUL = re.compile(r"^mul(\d+)$")


def model_by_name(name: str, params: Optional[dict] = None) -> ModelSpec:
    """Resolve a CLI model name (``vix32``, ``vq2``, ``mulJ``, ``cubic``, ``powerlaw``)."""
    params = dict(params or {})
    if name == "vix32":
        return builtin_vix32(**params)
    if name == "vq2":
        if params:
            raise ValueError("vq2 takes no parameters")
        return builtin_vq2()
    if name == "cubic":
        return builtin_pure_cubic(**params)
    if name == "mul":
        return builtin_multi_delay(**params)
    if name == "powerlaw":
        return custom_powerlaw(**params)
    m = _MUL.match(name)
    if m:
        if params:
            raise ValueError(f"{name} takes no parameters")
        return builtin_multi_delay(int(m.group(1)))
    raise ValueError(f"unknown model {name!r}")


# ---------------------------------------------------------------- validator

@dataclass
class AssumptionRecord:
    max_violation: float
    witness: Optional[tuple]
    samples: int
    fitted_constant: float

    def as_dict(self) -> dict:
        return {
            "max_violation": self.max_violation,
            "witness": None if self.witness is None else [float(v) for v in self.witness],
            "samples": self.samples,
            "fitted_constant": self.fitted_constant,
        }


@dataclass
class AssumptionReport:
    model: str
    box: tuple[float, float]
    records: dict[str, AssumptionRecord]

    @property
    def max_violation(self) -> float:
        return max(r.max_violation for r in self.records.values())

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "box": list(self.box),
            "max_violation": self.max_violation,
            "records": {k: v.as_dict() for k, v in self.records.items()},
        }


def _record(lhs, rhs, factor, points) -> AssumptionRecord:
    """Summarise ``lhs <= rhs`` over samples; non-finite lhs/rhs count as violations."""
    with np.errstate(all="ignore"):
        viol = np.maximum(lhs - rhs, 0.0)
        viol = np.where(np.isfinite(lhs) & np.isfinite(rhs), viol, np.inf)
        ratio = np.where(factor > 0, lhs / np.where(factor > 0, factor, 1.0), 0.0)
    i = int(np.argmax(viol))
    worst = float(viol[i])
    witness = None
    if worst > 0:
        witness = tuple(float(v) for v in np.concatenate([np.atleast_1d(p[i]) for p in points]))
    fitted = float(np.nanmax(np.where(np.isfinite(ratio), ratio, np.inf))) if ratio.size else 0.0
    return AssumptionRecord(worst, witness, int(np.size(lhs)), max(fitted, 0.0))


def check_assumptions(model: ModelSpec, box=(-10.0, 10.0), n_samples: int = 10_000,
                      rng_seed: int = 0) -> AssumptionReport:
    """Falsify the structural assumptions by uniform sampling in ``box``.

    Each record carries the largest ``max(0, lhs - rhs)`` under the declared
    constants, a witness point, and the smallest constant that would cover
    all samples.
    """
    lo, hi = float(box[0]), float(box[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise ValueError(f"degenerate box {box!r}")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    rng = np.random.default_rng(rng_seed)
    n = int(n_samples)
    m = rng.uniform(lo, hi, n)
    q = rng.uniform(lo, hi, n)
    a, b = np.minimum(m, q), np.maximum(m, q)
    mv = rng.uniform(lo, hi, (model.r, n))
    nv = rng.uniform(lo, hi, (model.r, n))
    tau = model.tau
    ts = rng.uniform(-tau, 0.0, n) if tau > 0 else np.zeros(n)
    ss = rng.uniform(-tau, 0.0, n) if tau > 0 else np.zeros(n)

    def ev(f, *args):
        with np.errstate(all="ignore"):
            try:
                return np.broadcast_to(np.asarray(f(*args), dtype=float), (n,)).copy()
            except (ArithmeticError, ValueError):
                return np.full(n, np.nan)

    a1m, a1q = ev(model.alpha1, m), ev(model.alpha1, q)
    a2m, a2q = ev(model.alpha2, m), ev(model.alpha2, q)
    bm, bq = ev(model.beta, m), ev(model.beta, q)
    d = np.abs(m - q)
    rec = {}
    with np.errstate(all="ignore"):
        f = (1 + np.abs(m) ** model.l1 + np.abs(q) ** model.l1) * d ** model.eta
        rec["alpha1_holder"] = _record(np.abs(a1m - a1q), model.L1 * f, f, (m, q))
        a1a, a1b = ev(model.alpha1, a), ev(model.alpha1, b)
        rec["alpha1_nonincreasing"] = _record(a1b - a1a, np.zeros(n), np.zeros(n), (a, b))
        rec["alpha2_one_sided"] = _record((m - q) * (a2m - a2q), model.L1 * d ** 2, d ** 2, (m, q))
        s = np.abs(mv - nv).sum(axis=0)
        rec["alpha3_lipschitz"] = _record(np.abs(ev(model.alpha3, mv) - ev(model.alpha3, nv)),
                                          model.L1 * s, s, (mv.T, nv.T))
        kh = m * (a1m + a2m) + 0.5 * (model.p_check - 1) * bm ** 2
        f = 1 + m ** 2
        rec["khasminskii"] = _record(kh, model.L2 * f, f, (m,))
        f = (1 + np.abs(m) ** model.l2 + np.abs(q) ** model.l2) * d
        rec["alpha2_poly_lipschitz"] = _record(np.abs(a2m - a2q), model.L3 * f, f, (m, q))
        f = (1 + np.abs(m) ** model.l3 + np.abs(q) ** model.l3) * d ** model.sigma
        rec["beta_holder"] = _record(np.abs(bm - bq), model.L3 * f, f, (m, q))
        f = np.abs(ts - ss) ** model.gamma_xi
        rec["xi_holder"] = _record(np.abs(ev(model.xi, ts) - ev(model.xi, ss)), model.L4 * f, f, (ts, ss))
    return AssumptionReport(model.name, (lo, hi), rec)
