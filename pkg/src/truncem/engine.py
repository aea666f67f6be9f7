"""Truncated and classical Euler-Maruyama stepping over a delay-commensurate grid.

Paths are stored as rows of length ``M + M_T + 1``; column ``M + k`` holds
node ``t_k``.  Delayed states are read by integer offset, no interpolation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend, _pykernels
from .grid import GridSpec
from .model import ModelSpec
from .truncation import TruncationPolicy, truncation_bound

__all__ = [
    "SimulationFault",
    "DiscretePath",
    "EXPLOSION_THRESHOLD",
    "initial_block",
    "simulate_batch",
    "simulate_truncated",
    "simulate_classical",
    "step_process_value",
]

EXPLOSION_THRESHOLD = 1e12


class SimulationFault(RuntimeError):
    """Non-finite state in a truncated-scheme run."""

    def __init__(self, msg, path_index=None, step=None):
        super().__init__(msg)
        self.path_index = path_index
        self.step = step


@dataclass
class DiscretePath:
    grid: GridSpec
    values: np.ndarray
    scheme: str = "truncated"
    exploded_at: Optional[int] = None

    @property
    def exploded(self) -> bool:
        return self.exploded_at is not None

    def at(self, k: int) -> float:
        """Value at node ``t_k``, ``-M <= k <= M_T``."""
        if not -self.grid.M <= k <= self.grid.M_T:
            raise IndexError(k)
        return float(self.values[self.grid.M + k])

    @property
    def forward(self) -> np.ndarray:
        return self.values[self.grid.M:]


def _check_grid(model: ModelSpec, grid: GridSpec):
    if len(grid.offsets) != model.r:
        raise ValueError(f"grid has {len(grid.offsets)} delays, model has {model.r}")
    for k, tau in zip(grid.offsets, model.delays):
        if abs(k * grid.delta - tau) > 1e-12 * max(tau, 1.0):
            raise ValueError(f"grid offset {k} does not match delay {tau}")


def initial_block(model: ModelSpec, grid: GridSpec, n_paths: int) -> np.ndarray:
    """Path buffer with the initial segment written into columns ``0..M``."""
    paths = np.empty((n_paths, grid.n_nodes))
    hist = np.asarray(model.xi(np.arange(-grid.M, 1) * grid.delta), dtype=float)
    paths[:, : grid.M + 1] = np.broadcast_to(hist, (grid.M + 1,))
    return paths


def simulate_batch(model: ModelSpec, grid: GridSpec, increments, policy: TruncationPolicy | None = None,
                   scheme: str = "truncated", backend: str | None = None,
                   blowup: float = EXPLOSION_THRESHOLD):
    """Simulate one path per row of ``increments`` (shape ``(n, M_T)``).

    Returns ``(paths, fault)`` where ``fault[i]`` is the first node index at
    which path ``i`` became non-finite (truncated) or exploded (classical),
    ``-1`` otherwise.  Values after that node are NaN.
    """
    _check_grid(model, grid)
    dB = np.ascontiguousarray(np.atleast_2d(np.asarray(increments, dtype=float)))
    if dB.shape[1] != grid.M_T:
        raise ValueError(f"need {grid.M_T} increments per path, got {dB.shape[1]}")
    if scheme == "truncated":
        if policy is None:
            raise ValueError("truncated scheme needs a policy")
        bound, truncated = truncation_bound(policy, grid.delta), True
    elif scheme == "classical":
        bound, truncated = math.inf, False
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    paths = initial_block(model, grid, dB.shape[0])
    offsets = np.asarray(grid.offsets, dtype=np.int64)
    if model.powerlaw is not None:
        coef, expo, odd, ends = model.powerlaw.term_table()
        w3 = np.asarray(model.powerlaw.alpha3_weights, dtype=np.float64)
        kernel = _backend.powerlaw_kernel(backend)
        fault = kernel(paths, dB, offsets, w3, coef, expo, odd, ends,
                       float(bound), float(grid.delta), int(grid.M), truncated, float(blowup))
    else:
        fault = _pykernels.tem_callable(paths, dB, offsets, model, bound, grid.delta,
                                        grid.M, truncated, blowup)
    return paths, np.asarray(fault)


def simulate_truncated(model: ModelSpec, policy: TruncationPolicy, grid: GridSpec, increments,
                       backend: str | None = None) -> DiscretePath:
    paths, fault = simulate_batch(model, grid, np.asarray(increments)[None, :], policy, backend=backend)
    if fault[0] >= 0:
        raise SimulationFault(f"non-finite state at step {fault[0]}", 0, int(fault[0]))
    return DiscretePath(grid, paths[0], "truncated")


def simulate_classical(model: ModelSpec, grid: GridSpec, increments,
                       backend: str | None = None) -> DiscretePath:
    paths, fault = simulate_batch(model, grid, np.asarray(increments)[None, :],
                                  scheme="classical", backend=backend)
    return DiscretePath(grid, paths[0], "classical", None if fault[0] < 0 else int(fault[0]))


def step_process_value(path: DiscretePath, t: float) -> float:
    """Left-constant step process: ``values[floor(t / delta)]``, ``values[M_T]`` at ``t = T``."""
    g = path.grid
    if not 0 <= t <= g.T * (1 + 1e-12):
        raise ValueError(f"t={t} outside [0, {g.T}]")
    q = t / g.delta
    k = round(q)
    if abs(q - k) > 1e-9 * max(q, 1.0):
        k = math.floor(q)
    return path.at(min(int(k), g.M_T))
