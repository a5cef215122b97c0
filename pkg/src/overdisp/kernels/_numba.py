"""Loop kernels compiled with numba.

Each public kernel takes flat float64 arrays and returns a float64 array of
per-observation log-probabilities. Failures come back as nan; callers decide
whether that is an error.
"""
import math

import numpy as np

from .._accel import njit
from . import _scalar

lanczos_lgamma = njit(_scalar.lanczos_lgamma)

LOG_2PI = _scalar.LOG_2PI
SQRT2 = _scalar.SQRT2
MAX_NEWTON = 50
MAX_STEP = 5.0


@njit
def log_rising(a, y):
    if y <= 256:
        s = 0.0
        for k in range(y):
            s += math.log(a + k)
        return s
    return lanczos_lgamma(y + a) - lanczos_lgamma(a)


@njit
def _nb_one(y, mu, tau):
    a = 1.0 / tau
    tm = tau * mu
    return (y * math.log(tm) - (y + a) * math.log1p(tm)
            + log_rising(a, y) - lanczos_lgamma(y + 1.0))


@njit
def _pois_one(y, lam):
    return y * math.log(lam) - lam - lanczos_lgamma(y + 1.0)


@njit
def lgamma_arr(x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = lanczos_lgamma(x[i])
    return out


@njit
def poisson_logpmf_arr(y, lam):
    out = np.empty(y.shape[0])
    for i in range(y.shape[0]):
        out[i] = _pois_one(int(y[i]), lam[i])
    return out


@njit
def nb_logpmf_arr(y, mu, tau):
    out = np.empty(y.shape[0])
    for i in range(y.shape[0]):
        out[i] = _nb_one(int(y[i]), mu[i], tau)
    return out


@njit
def _ln_mode(y, lms, s2):
    # concave in g: h'(g) = y - exp(lms + g) - g / s2
    p = y + 0.5
    g = (math.log(p) - lms) * p * s2 / (p * s2 + 1.0)
    lo = -math.inf
    hi = math.inf
    for _ in range(MAX_NEWTON):
        e = math.exp(lms + g)
        d1 = y - e - g / s2
        d2 = -e - 1.0 / s2
        if d1 == 0.0:
            return g
        if d1 > 0.0:
            lo = g
        else:
            hi = g
        step = -d1 / d2
        if step > MAX_STEP:
            step = MAX_STEP
        elif step < -MAX_STEP:
            step = -MAX_STEP
        gn = g + step
        if abs(gn - g) <= 1e-12 * (1.0 + abs(g)):
            return gn
        if (gn <= lo or gn >= hi) and lo > -math.inf and hi < math.inf:
            gn = 0.5 * (lo + hi)
        g = gn
    return g


@njit
def ln_logpmf_arr(y, eta, sigma2, nodes, lw2):
    """Poisson-lognormal log pmf. ``lw2`` holds log(weight) + node**2."""
    n = y.shape[0]
    m = nodes.shape[0]
    out = np.empty(n)
    half_log = 0.5 * (LOG_2PI + math.log(sigma2))
    for i in range(n):
        yi = y[i]
        lms = eta[i] - 0.5 * sigma2
        g = _ln_mode(yi, lms, sigma2)
        s = 1.0 / math.sqrt(math.exp(lms + g) + 1.0 / sigma2)
        scale = SQRT2 * s
        vmax = -math.inf
        vals = np.empty(m)
        for k in range(m):
            gk = g + scale * nodes[k]
            v = yi * (gk + lms) - math.exp(gk + lms) - 0.5 * gk * gk / sigma2 + lw2[k]
            vals[k] = v
            if v > vmax:
                vmax = v
        acc = 0.0
        for k in range(m):
            acc += math.exp(vals[k] - vmax)
        out[i] = (vmax + math.log(acc) + math.log(scale)
                  - lanczos_lgamma(yi + 1.0) - half_log)
    return out


@njit
def _ig_mode(y, lmu, alpha):
    # concave in u: g'(u) = y - 1/2 - exp(lmu + u) - sinh(u) / alpha
    pl = y + 0.5
    ul = math.log(pl) - lmu
    up = -math.asinh(0.5 * alpha)
    pp = math.cosh(up) / alpha
    u = (pl * ul + pp * up) / (pl + pp)
    lo = -math.inf
    hi = math.inf
    for _ in range(MAX_NEWTON):
        e = math.exp(lmu + u)
        d1 = y - 0.5 - e - math.sinh(u) / alpha
        d2 = -e - math.cosh(u) / alpha
        if d1 == 0.0:
            return u
        if d1 > 0.0:
            lo = u
        else:
            hi = u
        step = -d1 / d2
        if step > MAX_STEP:
            step = MAX_STEP
        elif step < -MAX_STEP:
            step = -MAX_STEP
        un = u + step
        if abs(un - u) <= 1e-12 * (1.0 + abs(u)):
            return un
        if (un <= lo or un >= hi) and lo > -math.inf and hi < math.inf:
            un = 0.5 * (lo + hi)
        u = un
    return u


@njit
def ig_logpmf_arr(y, mu, alpha, nodes, lw2):
    """Poisson-inverse-Gaussian log pmf, integrated over u = log(nu)."""
    n = y.shape[0]
    m = nodes.shape[0]
    out = np.empty(n)
    half_log = 0.5 * (LOG_2PI + math.log(alpha))
    for i in range(n):
        yi = y[i]
        lmu = math.log(mu[i])
        u = _ig_mode(yi, lmu, alpha)
        s = 1.0 / math.sqrt(math.exp(lmu + u) + math.cosh(u) / alpha)
        scale = SQRT2 * s
        vmax = -math.inf
        vals = np.empty(m)
        for k in range(m):
            uk = u + scale * nodes[k]
            ek = math.exp(uk)
            em = math.expm1(uk)
            # (nu - 1)^2 / (2 alpha nu) with nu = e^u, cancellation-free
            v = ((yi - 0.5) * uk + yi * lmu - mu[i] * ek
                 - 0.5 * em * em / (ek * alpha) + lw2[k])
            vals[k] = v
            if v > vmax:
                vmax = v
        acc = 0.0
        for k in range(m):
            acc += math.exp(vals[k] - vmax)
        out[i] = (vmax + math.log(acc) + math.log(scale)
                  - lanczos_lgamma(yi + 1.0) - half_log)
    return out
