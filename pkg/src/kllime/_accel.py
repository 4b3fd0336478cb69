"""Numba switch.

Set ``KLLIME_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
path. The same source is used for both paths; only the jit wrapper differs.
"""
import os

_flag = os.environ.get("KLLIME_DISABLE_NUMBA", "").strip().lower()
DISABLED = _flag not in ("", "0", "false", "no")

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"


def jit(func):
    """Compile ``func`` with numba if available, else return it unchanged."""
    if not HAS_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


def maybe_jit(func):
    return jit(func) if USE_NUMBA else func
