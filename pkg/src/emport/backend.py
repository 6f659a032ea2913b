"""Compute-backend selection.

Hot numeric kernels are compiled with numba when it is available. A pure
numpy/Python path with identical semantics is kept behind the ``EM_BACKEND``
environment variable:

    EM_BACKEND=numba   force the jitted kernels (error if numba is missing)
    EM_BACKEND=numpy   force the plain-Python/numpy fallback

Unset, the jitted path is used whenever numba imports cleanly. The selection
is made once at import time; results are bit-deterministic within a backend.
"""
from __future__ import annotations

import os

_requested = os.environ.get("EM_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise RuntimeError(f"EM_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    NUMBA_ENABLED = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        if _requested == "numba":
            raise
        NUMBA_ENABLED = False


def maybe_njit(func=None, **kwargs):
    """Apply ``numba.njit`` when the numba backend is active, else no-op."""
    if func is None:
        return lambda f: maybe_njit(f, **kwargs)
    if NUMBA_ENABLED:
        from numba import njit

        kwargs.setdefault("cache", True)
        return njit(**kwargs)(func)
    return func


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
