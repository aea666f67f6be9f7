"""Pure numpy stepping kernels, vectorised across paths.

``tem_powerlaw`` is the fallback for the compiled kernel of the same name and
reproduces its floating-point operation order.  ``tem_callable`` handles
models given only as Python callables.
"""
from __future__ import annotations

import numpy as np

from .powerlaw import abspow


def _terms(a, sg, coef, expo, odd, lo, hi):
    if hi == lo:
        return np.zeros_like(a)
    s = None
    for j in range(lo, hi):
        p = abspow(a, expo[j])
        if odd[j]:
            p = sg * p
        v = coef[j] * p
        s = v if s is None else s + v
    return s


def _delay_sum(paths, col, offsets, w3, unit):
    g = paths[:, col - offsets]
    if not unit:
        g = g * w3
    # accumulate is strictly sequential along the row, like the compiled loop
    return np.add.accumulate(g, axis=1)[:, -1]


def _finish(paths, fault, M):
    for i in np.flatnonzero(fault >= 0):
        paths[i, M + fault[i] + 1:] = np.nan
    return fault


def tem_powerlaw(paths, dB, offsets, w3, coef, expo, odd, ends, bound, delta, M,
                 truncated, blowup):
    n, MT = dB.shape
    offsets = np.asarray(offsets, dtype=np.int64)
    w3 = np.asarray(w3, dtype=float)
    unit = bool(np.all(w3 == 1.0))
    e1, e2, e3 = (int(e) for e in ends)
    fault = np.full(n, -1, dtype=np.int64)
    with np.errstate(all="ignore"):
        for k in range(MT):
            x = paths[:, M + k]
            xt = np.clip(x, -bound, bound) if truncated else x
            a = np.abs(xt)
            sg = np.sign(xt)
            s1 = _terms(a, sg, coef, expo, odd, 0, e1)
            s2 = _terms(a, sg, coef, expo, odd, e1, e2)
            s3 = _delay_sum(paths, M + k, offsets, w3, unit)
            drift = s1 + s2 + s3
            bb = _terms(a, sg, coef, expo, odd, e2, e3)
            xn = x + drift * delta + bb * dB[:, k]
            paths[:, M + k + 1] = xn
            bad = ~np.isfinite(xn)
            if not truncated:
                bad |= np.abs(xn) > blowup
            fresh = bad & (fault < 0)
            if fresh.any():
                fault[fresh] = k + 1
    return _finish(paths, fault, M)


def tem_callable(paths, dB, offsets, model, bound, delta, M, truncated, blowup):
    n, MT = dB.shape
    offsets = np.asarray(offsets, dtype=np.int64)
    fault = np.full(n, -1, dtype=np.int64)
    with np.errstate(all="ignore"):
        for k in range(MT):
            x = paths[:, M + k]
            xt = np.clip(x, -bound, bound) if truncated else x
            m = paths[:, M + k - offsets].T
            drift = model.alpha1(xt) + model.alpha2(xt) + model.alpha3(m)
            xn = x + drift * delta + model.beta(xt) * dB[:, k]
            paths[:, M + k + 1] = xn
            bad = ~np.isfinite(xn)
            if not truncated:
                bad |= np.abs(xn) > blowup
            fresh = bad & (fault < 0)
            if fresh.any():
                fault[fresh] = k + 1
    return _finish(paths, fault, M)
