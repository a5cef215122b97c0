"""Hot numeric kernels with a numba and a pure-numpy implementation.

The active backend is chosen by :mod:`overdisp._accel`; both modules stay
importable so tests and benchmarks can compare them directly.
"""
from .._accel import BACKEND, USE_NUMBA
from . import _numpy as numpy_backend

if USE_NUMBA:
    from . import _numba as numba_backend
    _active = numba_backend
else:
    numba_backend = None
    _active = numpy_backend

lgamma_arr = _active.lgamma_arr
poisson_logpmf_arr = _active.poisson_logpmf_arr
nb_logpmf_arr = _active.nb_logpmf_arr
ln_logpmf_arr = _active.ln_logpmf_arr
ig_logpmf_arr = _active.ig_logpmf_arr

__all__ = [
    "BACKEND", "numpy_backend", "numba_backend", "lgamma_arr",
    "poisson_logpmf_arr", "nb_logpmf_arr", "ln_logpmf_arr", "ig_logpmf_arr",
]
