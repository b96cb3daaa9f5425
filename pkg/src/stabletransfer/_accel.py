"""Backend selection for the compiled kernels.

Set ``STK_NUMBA=0`` in the environment to force the pure-numpy code path.
Numba is used when importable and not disabled.
"""
from __future__ import annotations

import os

_DISABLED = os.environ.get("STK_NUMBA", "1").strip().lower() in ("0", "false", "off", "no")

try:
    if _DISABLED:
        raise ImportError("disabled via STK_NUMBA")
    import numba

    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit(fn):
    """Compile ``fn`` with numba in nopython mode, or return it unchanged."""
    if numba is None:
        return fn
    return numba.njit(cache=True, fastmath=False)(fn)


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"
