"""Power-law coefficient terms ``c * |x|**e`` (optionally times ``sign(x)``).

Every built-in model is a sum of such terms plus a linear delay part, which is
what lets the compiled kernel run without calling back into Python.  The
evaluation order here is mirrored exactly by ``_kernels.pyx``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class PowerTerm:
    """``coef * |x|**exponent``, times ``sign(x)`` when ``odd``."""

    coef: float
    exponent: float
    odd: bool = False

    def __post_init__(self):
        if self.exponent < 0:
            raise ValueError("negative exponents are not supported")


def abspow(a, exponent: float):
    """``a**exponent`` for ``a >= 0``.

    Half-integer exponents use repeated multiplication and one ``sqrt``, both
    correctly rounded, so results agree bitwise with the compiled kernel.
    """
    a = np.asarray(a, dtype=float)
    twice = 2.0 * exponent
    if twice == np.floor(twice):
        n = int(np.floor(exponent))
        r = np.ones_like(a)
        for _ in range(n):
            r = r * a
        if twice != 2.0 * n:
            r = r * np.sqrt(a)
        return r
    return np.power(a, exponent)


def eval_terms(terms: Sequence[PowerTerm], x):
    x = np.asarray(x, dtype=float)
    if not terms:
        return np.zeros_like(x)
    a = np.abs(x)
    sg = np.sign(x)
    s = None
    for term in terms:
        p = abspow(a, term.exponent)
        if term.odd:
            p = sg * p
        v = term.coef * p
        s = v if s is None else s + v
    return s


def eval_linear(weights: Sequence[float], m):
    """Ordered sum ``w[0]*m[0] + w[1]*m[1] + ...`` over the first axis of ``m``."""
    s = None
    for w, col in zip(weights, m):
        v = w * np.asarray(col, dtype=float)
        s = v if s is None else s + v
    return s


@dataclass(frozen=True)
class PowerLawCoefficients:
    """Drift ``alpha1 + alpha2 + sum(w_v m_v)`` and diffusion ``beta`` as term lists."""

    alpha1: tuple[PowerTerm, ...]
    alpha2: tuple[PowerTerm, ...]
    beta: tuple[PowerTerm, ...]
    alpha3_weights: tuple[float, ...]

    def term_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Flattened ``(coef, exponent, odd, group_end)`` arrays for the kernels.

        Groups are alpha1, alpha2, beta in that order; ``group_end`` holds the
        cumulative end index of each group.
        """
        terms = self.alpha1 + self.alpha2 + self.beta
        coef = np.array([t.coef for t in terms], dtype=np.float64)
        expo = np.array([t.exponent for t in terms], dtype=np.float64)
        odd = np.array([1 if t.odd else 0 for t in terms], dtype=np.int32)
        ends = np.cumsum([len(self.alpha1), len(self.alpha2), len(self.beta)]).astype(np.int32)
        return coef, expo, odd, ends

    def make_callables(self):
        a1, a2, b, w = self.alpha1, self.alpha2, self.beta, self.alpha3_weights

        def alpha1(x):
            return eval_terms(a1, x)

        def alpha2(x):
            return eval_terms(a2, x)

        def alpha3(m):
            if len(m) != len(w):
                raise ValueError(f"alpha3 expects {len(w)} arguments, got {len(m)}")
            return eval_linear(w, m)

        def beta(x):
            return eval_terms(b, x)

        return alpha1, alpha2, alpha3, beta
