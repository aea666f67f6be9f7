"""Uniform time grid commensurate with every delay and the horizon."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["GridSpec", "IncommensurateStepError", "build_grid"]

REL_TOL = 1e-12


class IncommensurateStepError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    delta: float
    T: float
    M: int
    M_T: int
    offsets: tuple[int, ...]

    @property
    def n_nodes(self) -> int:
        """Nodes ``k = -M, ..., M_T``."""
        return self.M + self.M_T + 1

    def times(self) -> np.ndarray:
        return np.arange(-self.M, self.M_T + 1) * self.delta

    def forward_times(self) -> np.ndarray:
        return np.arange(self.M_T + 1) * self.delta

    def refine(self, factor: int) -> "GridSpec":
        return GridSpec(self.delta / factor, self.T, self.M * factor, self.M_T * factor,
                        tuple(o * factor for o in self.offsets))


def _steps(length: float, delta: float, what: str) -> int:
    q = length / delta
    k = round(q)
    if abs(q - k) > REL_TOL * max(abs(q), 1.0):
        raise IncommensurateStepError(f"incommensurate step size: {what}={length!r} is not a multiple of delta={delta!r}")
    return int(k)


def build_grid(T: float, delays, delta: float) -> GridSpec:
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    offsets = tuple(_steps(tau, delta, f"delay {tau!r}") for tau in delays)
    M_T = _steps(T, delta, "T")
    if offsets[0] != 0:
        raise ValueError("first delay must be 0")
    if any(b <= a for a, b in zip(offsets, offsets[1:])):
        raise IncommensurateStepError("delta too coarse: distinct delays map to the same grid offset")
    return GridSpec(float(delta), float(T), offsets[-1], M_T, offsets)
