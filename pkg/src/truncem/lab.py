"""Coupled Monte Carlo ensembles: strong errors, moments, step gaps, exit probabilities.

Paths are processed in fixed blocks of ``BLOCK`` path indices.  Every
per-path quantity depends only on ``(seed, path_index)``, and reductions run
over the full per-path array in index order, so results do not depend on the
number of workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .brownian import BrownianDriver, coarsen
from .engine import SimulationFault, simulate_batch
from .grid import GridSpec, build_grid
from .model import ModelSpec
from .powerlaw import eval_linear
from .truncation import TruncationPolicy, truncation_bound

__all__ = [
    "METRICS",
    "BLOCK",
    "ErrorPoint",
    "ErrorReport",
    "MomentEstimate",
    "fit_rate",
    "strong_errors",
    "estimate_strong_error",
    "estimate_moment",
    "estimate_step_gap",
    "estimate_exit_probability",
    "exit_probabilities",
]

METRICS = ("l1_terminal", "l2_terminal", "l1_sup", "l2_sup")
BLOCK = 32


@dataclass
class ErrorPoint:
    delta: float
    error: float
    stderr: float
    n_paths: int


@dataclass
class ErrorReport:
    model: str
    metric: str
    delta_ref: float
    points: list[ErrorPoint]
    seed: int
    log_C: Optional[float] = None
    p_star: Optional[float] = None

    @property
    def deltas(self) -> np.ndarray:
        return np.array([p.delta for p in self.points])

    @property
    def errors(self) -> np.ndarray:
        return np.array([p.error for p in self.points])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([p.stderr for p in self.points])

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "metric": self.metric,
            "delta_ref": self.delta_ref,
            "seed": self.seed,
            "log_C": self.log_C,
            "p_star": self.p_star,
            "points": [vars(p).copy() for p in self.points],
        }


@dataclass
class MomentEstimate:
    times: np.ndarray
    moments: np.ndarray
    max: float
    explosion_fraction: float = 0.0
    extras: dict = field(default_factory=dict)


def fit_rate(points) -> tuple[float, float]:
    """Least-squares fit ``log err = log C + p* log delta``; returns ``(log C, p*)``."""
    pts = [(float(d), float(e)) for d, e in points]
    if len(pts) < 2:
        raise ValueError("need at least two points to fit a rate")
    d, e = np.array(pts).T
    if np.any(d <= 0):
        raise ValueError("step sizes must be positive")
    if np.any(~(e > 0)):
        raise ValueError("errors must be positive to take logs; increase n_paths")
    x, y = np.log(d), np.log(e)
    if np.ptp(x) == 0:
        raise ValueError("need at least two distinct step sizes")
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    return float(ym - slope * xm), slope


def _blocks(n_paths: int):
    return [range(s, min(s + BLOCK, n_paths)) for s in range(0, n_paths, BLOCK)]


def _run(n_paths: int, workers: int, fn: Callable):
    blocks = _blocks(n_paths)
    if workers <= 1 or len(blocks) == 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, blocks))


def _simulate_or_fault(model, grid, inc, policy, backend, first_index):
    paths, fault = simulate_batch(model, grid, inc, policy, backend=backend)
    bad = np.flatnonzero(fault >= 0)
    if bad.size:
        i = int(bad[0])
        raise SimulationFault(
            f"{model.name}: non-finite state in path {first_index + i} at step {fault[i]} "
            f"(delta={grid.delta:g})", first_index + i, int(fault[i]))
    return paths


def _ratio(delta: float, delta_ref: float) -> int:
    q = delta / delta_ref
    f = round(q)
    if f < 2 or abs(q - f) > 1e-9 * q:
        raise ValueError(f"delta_ref={delta_ref!r} must divide delta={delta!r} with ratio >= 2")
    return int(f)


def _summarise(d: np.ndarray, squared: bool) -> tuple[float, float]:
    n = d.size
    if not squared:
        return float(np.mean(d)), float(np.std(d, ddof=1) / math.sqrt(n))
    ms = float(np.mean(d * d))
    e = math.sqrt(ms)
    se_ms = float(np.std(d * d, ddof=1) / math.sqrt(n))
    return e, (se_ms / (2 * e) if e > 0 else 0.0)


def strong_errors(model: ModelSpec, policy: TruncationPolicy, T: float, deltas: Sequence[float],
                  delta_ref: float, n_paths: int, seed: int, workers: int = 1,
                  backend: str | None = None) -> dict[str, ErrorReport]:
    """All four strong-error metrics against a fine truncated-EM reference on the same Brownian paths."""
    deltas = [float(d) for d in deltas]
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2 for a standard error")
    if not deltas:
        raise ValueError("no step sizes given")
    if delta_ref >= min(deltas):
        raise ValueError("delta_ref must be smaller than every delta")
    g_ref = build_grid(T, model.delays, delta_ref)
    grids = [build_grid(T, model.delays, d) for d in deltas]
    factors = [_ratio(d, delta_ref) for d in deltas]
    for d in deltas + [delta_ref]:
        truncation_bound(policy, d)  # surface domain errors before simulating
    driver = BrownianDriver(seed, delta_ref, g_ref.M_T)

    def work(idx):
        inc = driver.block(idx)
        ref = _simulate_or_fault(model, g_ref, inc, policy, backend, idx[0])[:, g_ref.M:]
        out = np.empty((2, len(deltas), len(idx)))
        for j, (g, f) in enumerate(zip(grids, factors)):
            path = _simulate_or_fault(model, g, coarsen(inc, f), policy, backend, idx[0])[:, g.M:]
            diff = np.abs(ref[:, ::f] - path)
            out[0, j] = diff[:, -1]
            out[1, j] = diff.max(axis=1)
        return out

    per_path = np.concatenate(_run(n_paths, workers, work), axis=2)
    reports = {}
    for metric in METRICS:
        src = per_path[0] if metric.endswith("terminal") else per_path[1]
        squared = metric.startswith("l2")
        pts = []
        for j, d in enumerate(deltas):
            e, se = _summarise(src[j], squared)
            pts.append(ErrorPoint(d, e, se, n_paths))
        rep = ErrorReport(model.name, metric, float(delta_ref), pts, int(seed))
        try:
            rep.log_C, rep.p_star = fit_rate([(p.delta, p.error) for p in pts])
        except ValueError:
            pass
        reports[metric] = rep
    return reports


def estimate_strong_error(model: ModelSpec, policy: TruncationPolicy, T: float, deltas, delta_ref: float,
                          n_paths: int, seed: int, metric: str = "l1_terminal", workers: int = 1,
                          backend: str | None = None) -> ErrorReport:
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
    return strong_errors(model, policy, T, deltas, delta_ref, n_paths, seed, workers, backend)[metric]


def _ensemble(model, policy, grid, n_paths, seed, scheme, workers, backend, fn):
    driver = BrownianDriver(seed, grid.delta, grid.M_T)

    def work(idx):
        inc = driver.block(idx)
        if scheme == "truncated":
            paths = _simulate_or_fault(model, grid, inc, policy, backend, idx[0])
            fault = np.full(len(idx), -1)
        else:
            paths, fault = simulate_batch(model, grid, inc, scheme="classical", backend=backend)
        return fn(paths[:, grid.M:], fault)

    return _run(n_paths, workers, work)


def estimate_moment(model: ModelSpec, policy: TruncationPolicy, grid: GridSpec, n_paths: int, seed: int,
                    p: float = 2.0, scheme: str = "truncated", workers: int = 1,
                    backend: str | None = None) -> MomentEstimate:
    """Sample ``E|chi(t_k)|^p`` on the forward grid; exploded classical paths count as infinite."""
    if p < 1:
        raise ValueError("p must be >= 1")

    def fn(fwd, fault):
        with np.errstate(all="ignore"):
            v = np.abs(fwd) ** p
        v[~np.isfinite(v)] = np.inf
        return v, fault >= 0

    parts = _ensemble(model, policy, grid, n_paths, seed, scheme, workers, backend, fn)
    vals = np.concatenate([v for v, _ in parts])
    exploded = np.concatenate([e for _, e in parts])
    moments = vals.mean(axis=0)
    return MomentEstimate(grid.forward_times(), moments, float(moments.max()), float(exploded.mean()))


def _path_maxima(model, policy, grid, n_paths, seed, workers, backend):
    parts = _ensemble(model, policy, grid, n_paths, seed, "truncated", workers, backend,
                      lambda fwd, fault: np.abs(fwd).max(axis=1))
    return np.concatenate(parts)


def _check_K(model, grid, K):
    sup_xi = float(np.max(np.abs(model.xi(np.arange(-grid.M, 1) * grid.delta))))
    if not K > sup_xi:
        raise ValueError(f"K={K} must exceed sup|xi|={sup_xi}")


def estimate_exit_probability(model: ModelSpec, policy: TruncationPolicy, grid: GridSpec, n_paths: int,
                              seed: int, K: float, workers: int = 1, backend: str | None = None) -> float:
    """Fraction of paths with ``max_k |chi(t_k)| >= K``."""
    _check_K(model, grid, K)
    return float(np.mean(_path_maxima(model, policy, grid, n_paths, seed, workers, backend) >= K))


def exit_probabilities(model, policy, grid, n_paths, seed, Ks, workers=1, backend=None) -> list[float]:
    """Exit probabilities for several levels from one ensemble."""
    for K in Ks:
        _check_K(model, grid, K)
    mx = _path_maxima(model, policy, grid, n_paths, seed, workers, backend)
    return [float(np.mean(mx >= K)) for K in Ks]


def _truncated_coefficients(model: ModelSpec, paths: np.ndarray, grid: GridSpec, bound: float):
    """Truncated drift and diffusion at nodes ``0..M_T-1`` for every path."""
    M, MT = grid.M, grid.M_T
    x = paths[:, M:M + MT]
    xt = np.clip(x, -bound, bound)
    cols = (paths[:, M - o:M - o + MT] for o in grid.offsets)
    if model.powerlaw is not None:
        a3 = eval_linear(model.powerlaw.alpha3_weights, cols)
    else:
        a3 = model.alpha3(np.stack(list(cols)))
    return model.alpha1(xt) + model.alpha2(xt) + a3, model.beta(xt)


def estimate_step_gap(model: ModelSpec, policy: TruncationPolicy, delta: float, n_paths: int, seed: int,
                      p: float = 2.0, T: float = 2.0, workers: int = 1, backend: str | None = None) -> float:
    """``max_k E|chi(t_k + delta/2) - chi_bar(t_k + delta/2)|^p`` over the forward grid.

    The half-step Brownian increment is the first half of a stream drawn at
    ``delta / 2`` whose pairwise sums drive the scheme itself.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    grid = build_grid(T, model.delays, delta)
    bound = truncation_bound(policy, delta)
    driver = BrownianDriver(seed, delta / 2, 2 * grid.M_T)

    def work(idx):
        half = driver.block(idx)
        paths = _simulate_or_fault(model, grid, coarsen(half, 2), policy, backend, idx[0])
        drift, diff = _truncated_coefficients(model, paths, grid, bound)
        with np.errstate(all="ignore"):
            gap = drift * (delta / 2) + diff * half[:, 0::2]
            return (np.abs(gap) ** p).sum(axis=0)

    total = np.zeros(grid.M_T)
    for part in _run(n_paths, workers, work):
        total += part
    return float(np.max(total / n_paths))
