"""Kernel backend selection.

The compiled extension is used when it imports; ``TRUNCEM_BACKEND=python``
forces the numpy fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

AVAILABLE = ("cython", "python") if _compiled is not None else ("python",)


def _select() -> str:
    want = os.environ.get("TRUNCEM_BACKEND", "").strip().lower()
    if want in ("python", "numpy"):
        return "python"
    if want == "cython" and _compiled is None:
        raise ImportError("TRUNCEM_BACKEND=cython but truncem._kernels is not built")
    return "cython" if _compiled is not None else "python"


BACKEND = _select()


def powerlaw_kernel(backend: str | None = None):
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernel not available")
        return _compiled.tem_powerlaw
    if backend == "python":
        return _pykernels.tem_powerlaw
    raise ValueError(f"unknown backend {backend!r}")
