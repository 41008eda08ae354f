"""Kernel backend selection.

Hot kernels are written once as plain loops and compiled with numba when it is
available. Set ``CLASSTRACK_BACKEND=numpy`` to force the vectorised numpy
fallbacks instead (useful for debugging and for the kernel benchmark).
"""
import os

_requested = os.environ.get("CLASSTRACK_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(
        f"CLASSTRACK_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

try:
    from numba import njit as _numba_njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _requested == "numba"
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` in nopython/nogil mode when numba is usable.

    Without numba the function is returned unchanged, so the loop version
    stays callable (slowly) for cross-checking.
    """
    if not HAS_NUMBA:
        return func
    return _numba_njit(cache=True, nogil=True)(func)
