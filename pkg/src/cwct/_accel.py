"""numba switch.

Set ``CWCT_DISABLE_NUMBA=1`` before import to run every kernel through its
pure-numpy path. When numba is missing the numpy path is used silently.
"""
import os
import warnings

_DISABLED = os.environ.get("CWCT_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
    _numba_njit = None
    if not _DISABLED:
        warnings.warn("numba not importable, falling back to numpy kernels")

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise.

    Compilation happens regardless of ``USE_NUMBA`` so the benchmark can
    time both paths in one process; dispatch is decided by the callers.
    """
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    return _numba_njit(*args, **kwargs)
