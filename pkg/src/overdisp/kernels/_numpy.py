"""Vectorised numpy versions of the kernels in :mod:`._numba`.

Same signatures, same numerics up to floating-point reassociation. Newton
iterations run on the whole batch at once and stop when every element has
converged.
"""
import numpy as np

from . import _scalar

LOG_2PI = _scalar.LOG_2PI
SQRT2 = _scalar.SQRT2
MAX_NEWTON = 50
MAX_STEP = 5.0

_COEF = np.array(_scalar._LANCZOS_COEF)


def lgamma_arr(x):
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, np.nan)
    ok = (x > 0) & np.isfinite(x)
    z = x[ok]
    shift = np.zeros_like(z)
    small = z < 1.0
    while small.any():
        shift[small] -= np.log(z[small])
        z[small] += 1.0
        small = z < 1.0
    tmp = z + _scalar._LANCZOS_G
    tmp = (z + 0.5) * np.log(tmp) - tmp
    ser = _scalar._LANCZOS_C0 + np.sum(
        _COEF[None, :] / (z[:, None] + np.arange(1, _COEF.size + 1)[None, :]), axis=1)
    out[ok] = shift + tmp + np.log(_scalar._SQRT_2PI * ser / z)
    return out


def _log_rising(a, y):
    # ln Gamma(y + a) - ln Gamma(a); exact partial sums for small y
    y = y.astype(np.int64)
    out = np.empty(y.shape)
    small = y <= 256
    if small.any():
        ys = y[small]
        k = np.arange(ys.max() if ys.size else 0)
        terms = np.log(a + k)
        csum = np.concatenate([[0.0], np.cumsum(terms)])
        out[small] = csum[ys]
    big = ~small
    if big.any():
        out[big] = lgamma_arr(y[big] + a) - lgamma_arr(np.array([a]))[0]
    return out


def poisson_logpmf_arr(y, lam):
    return y * np.log(lam) - lam - lgamma_arr(y + 1.0)


def nb_logpmf_arr(y, mu, tau):
    a = 1.0 / tau
    tm = tau * mu
    return (y * np.log(tm) - (y + a) * np.log1p(tm)
            + _log_rising(a, y) - lgamma_arr(y + 1.0))


def _bracketed_newton(x, d1d2):
    """Safeguarded Newton for a strictly decreasing derivative, batched."""
    lo = np.full(x.shape, -np.inf)
    hi = np.full(x.shape, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for _ in range(MAX_NEWTON):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        xa = x[idx]
        d1, d2 = d1d2(xa, idx)
        done = d1 == 0.0
        pos = d1 > 0.0
        lo[idx[pos]] = xa[pos]
        hi[idx[~pos]] = xa[~pos]
        step = np.clip(-d1 / d2, -MAX_STEP, MAX_STEP)
        xn = xa + step
        conv = done | (np.abs(xn - xa) <= 1e-12 * (1.0 + np.abs(xa)))
        la, ha = lo[idx], hi[idx]
        out = ((xn <= la) | (xn >= ha)) & np.isfinite(la) & np.isfinite(ha) & ~conv
        xn[out] = 0.5 * (la[out] + ha[out])
        xn[done] = xa[done]
        x[idx] = xn
        active[idx[conv]] = False
    return x


def _gh_lse(vals, scale):
    vmax = vals.max(axis=1)
    return vmax + np.log(np.exp(vals - vmax[:, None]).sum(axis=1)) + np.log(scale)


def ln_logpmf_arr(y, eta, sigma2, nodes, lw2):
    y = np.asarray(y, dtype=float)
    lms = np.asarray(eta, dtype=float) - 0.5 * sigma2
    p = y + 0.5
    g = (np.log(p) - lms) * p * sigma2 / (p * sigma2 + 1.0)

    def d1d2(x, idx):
        e = np.exp(lms[idx] + x)
        return y[idx] - e - x / sigma2, -e - 1.0 / sigma2

    g = _bracketed_newton(g, d1d2)
    scale = SQRT2 / np.sqrt(np.exp(lms + g) + 1.0 / sigma2)
    gk = g[:, None] + scale[:, None] * nodes[None, :]
    vals = (y[:, None] * (gk + lms[:, None]) - np.exp(gk + lms[:, None])
            - 0.5 * gk * gk / sigma2 + lw2[None, :])
    return (_gh_lse(vals, scale) - lgamma_arr(y + 1.0)
            - 0.5 * (LOG_2PI + np.log(sigma2)))


def ig_logpmf_arr(y, mu, alpha, nodes, lw2):
    y = np.asarray(y, dtype=float)
    lmu = np.log(np.asarray(mu, dtype=float))
    pl = y + 0.5
    ul = np.log(pl) - lmu
    up = -np.arcsinh(0.5 * alpha)
    pp = np.cosh(up) / alpha
    u = (pl * ul + pp * up) / (pl + pp)

    def d1d2(x, idx):
        e = np.exp(lmu[idx] + x)
        return y[idx] - 0.5 - e - np.sinh(x) / alpha, -e - np.cosh(x) / alpha

    u = _bracketed_newton(u, d1d2)
    scale = SQRT2 / np.sqrt(np.exp(lmu + u) + np.cosh(u) / alpha)
    uk = u[:, None] + scale[:, None] * nodes[None, :]
    ek = np.exp(uk)
    em = np.expm1(uk)
    vals = ((y[:, None] - 0.5) * uk + (y * lmu)[:, None] - np.exp(lmu)[:, None] * ek
            - 0.5 * em * em / (ek * alpha) + lw2[None, :])
    return (_gh_lse(vals, scale) - lgamma_arr(y + 1.0)
            - 0.5 * (LOG_2PI + np.log(alpha)))
