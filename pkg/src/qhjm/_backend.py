"""Numba/numpy backend selection for the hot kernels.

Set QHJM_DISABLE_NUMBA=1 to force the pure-numpy fallback paths (useful
for debugging and as the reference implementation in the benchmark).
Numba being absent degrades to the same fallback with a warning-free
no-op decorator, so the package stays importable everywhere.
"""
from __future__ import annotations

import os

_DISABLE = os.environ.get("QHJM_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLE:
        raise ImportError("numba disabled via QHJM_DISABLE_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - depends on environment
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        """Identity decorator standing in for numba.njit."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
