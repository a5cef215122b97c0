"""Backend selection for the hot kernels.

Set ``OVERDISP_DISABLE_NUMBA=1`` to force the pure-numpy implementations even
when numba is importable. The choice is made once, at import time.
"""
import os

_FALSY = ("", "0", "false", "no", "off")


def _numba_requested():
    return os.environ.get("OVERDISP_DISABLE_NUMBA", "0").strip().lower() in _FALSY


try:
    import numba  # noqa: F401
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _numba_requested()
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(fn):
    """``numba.njit(cache=True)`` when numba is available, identity otherwise."""
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)
