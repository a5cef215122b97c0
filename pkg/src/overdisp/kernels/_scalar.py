"""Scalar math shared by the numba kernels and the pure-Python paths.

Everything here is written against :mod:`math` only so the same source can be
handed to ``numba.njit`` unchanged.
"""
import math

# Lanczos approximation, g = 607/128, 14 terms.
_LANCZOS_G = 5.24218750000000000
_LANCZOS_C0 = 0.999999999999997092
_LANCZOS_COEF = (
    57.1562356658629235,
    -59.5979603554754912,
    14.1360979747417471,
    -0.491913816097620199,
    0.339946499848118887e-4,
    0.465236289270485756e-4,
    -0.983744753048795646e-4,
    0.158088703224912494e-3,
    -0.210264441724104883e-3,
    0.217439618115212643e-3,
    -0.164318106536763890e-3,
    0.844182239838527433e-4,
    -0.261908384015814087e-4,
    0.368991826595316234e-5,
)
_SQRT_2PI = 2.5066282746310005
LOG_2PI = math.log(2.0 * math.pi)
SQRT2 = math.sqrt(2.0)


def lanczos_lgamma(x):
    """ln Gamma(x) for x > 0. Returns nan outside the domain."""
    if not (x > 0.0) or x == math.inf:
        return math.nan
    shift = 0.0
    # recurrence keeps the series away from the pole at 0
    while x < 1.0:
        shift -= math.log(x)
        x += 1.0
    tmp = x + _LANCZOS_G
    tmp = (x + 0.5) * math.log(tmp) - tmp
    ser = _LANCZOS_C0
    yy = x
    for c in _LANCZOS_COEF:
        yy += 1.0
        ser += c / yy
    return shift + tmp + math.log(_SQRT_2PI * ser / x)


def log_rising(a, y):
    """ln Gamma(y + a) - ln Gamma(a) for integer y >= 0."""
    if y <= 256:
        s = 0.0
        for k in range(y):
            s += math.log(a + k)
        return s
    return lanczos_lgamma(y + a) - lanczos_lgamma(a)


def nb_logpmf(y, mu, tau):
    a = 1.0 / tau
    tm = tau * mu
    return (y * math.log(tm) - (y + a) * math.log1p(tm)
            + log_rising(a, y) - lanczos_lgamma(y + 1.0))


def poisson_logpmf(y, lam):
    return y * math.log(lam) - lam - lanczos_lgamma(y + 1.0)
