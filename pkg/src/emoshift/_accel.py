"""Backend selection for the hot numeric kernels.

Kernels are written once as plain Python loops and compiled with numba when
it is importable and not disabled.  Set ``EMOSHIFT_BACKEND=numpy`` to force
the vectorised numpy fallbacks (useful for debugging and on platforms where
numba is unavailable).
"""

import os

BACKEND_ENV = "EMOSHIFT_BACKEND"

try:
    import numba as _numba
except ImportError:  # pragma: no cover - exercised only without numba
    _numba = None

HAVE_NUMBA = _numba is not None


def _requested_backend():
    value = os.environ.get(BACKEND_ENV, "").strip().lower()
    if value in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if value not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba', 'numpy' or 'auto', got {value!r}")
    if value == "numba" and not HAVE_NUMBA:
        raise ImportError(f"{BACKEND_ENV}=numba but numba is not installed")
    return value


BACKEND = _requested_backend()


def njit(func):
    """Compile ``func`` with numba if available, otherwise return it unchanged.

    The uncompiled function stays reachable as ``.py_func`` either way so the
    benchmark and equivalence tests can call the interpreted loop directly.
    """
    if not HAVE_NUMBA:
        func.py_func = func
        return func
    return _numba.njit(cache=True, nogil=True)(func)
