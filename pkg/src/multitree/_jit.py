"""Backend selection for the hot kernels.

Kernels are written once as plain loops over numpy arrays. When numba is
importable and ``MULTITREE_DISABLE_NUMBA`` is unset (or ``0``), they are
compiled with ``numba.njit``; otherwise they run as ordinary Python.
"""

import os

_disabled = os.environ.get("MULTITREE_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False

BACKEND = "numba" if HAS_NUMBA else "numpy"


def njit(fn):
    if HAS_NUMBA:
        return _njit(cache=True, nogil=True)(fn)
    return fn
