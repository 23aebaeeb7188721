"""Kernel backend selection.

Hot loops are compiled with numba when it is importable. Setting
``NEWSVOL_BACKEND=numpy`` forces the pure-numpy code path, which is also used
automatically when numba is missing.
"""

import os

BACKEND_ENV = "NEWSVOL_BACKEND"

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    _numba = None


def _select() -> str:
    requested = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if requested not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {requested!r}")
    if requested == "numba" and _numba is None:
        return "numpy"
    return requested


BACKEND = _select()


def njit(func):
    """``numba.njit(cache=True)`` or the identity when numba is unavailable."""
    if _numba is None:
        return func
    return _numba.njit(cache=True, nogil=True)(func)
