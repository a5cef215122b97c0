"""Marginal pmfs of Poisson mixtures that have no closed form.

Integrals are taken by mode-centred (adaptive) Gauss-Hermite quadrature in an
unbounded working variable: the lognormal mixture in gamma = log(nu) + s2/2,
the inverse Gaussian mixture in u = log(nu). The log-integrand is concave in
both, so the mode is found by safeguarded Newton and the rule is scaled by
the local curvature there.

The gamma mixture has a closed form (negative binomial); the numerical
version here is only an oracle for it and uses its own rule, see
:func:`marginal_gamma_logpmf_numeric`.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dist import NuDistribution, _require_count, _require_positive, nu_logpdf, poisson_logpmf
from .errors import DomainError, IntegrationError

MAX_NODES = 200


@dataclass(frozen=True)
class QuadratureSpec:
    node_count: int = 40
    doubling_tolerance: float = 1e-8

    def __post_init__(self):
        if int(self.node_count) != self.node_count or self.node_count < 8:
            raise DomainError(f"node_count must be an integer >= 8, got {self.node_count!r}")
        if self.node_count > MAX_NODES:
            raise DomainError(f"node_count must be <= {MAX_NODES}, got {self.node_count!r}")
        if not (self.doubling_tolerance > 0):
            raise DomainError("doubling_tolerance must be positive")


DEFAULT_SPEC = QuadratureSpec()


@functools.lru_cache(maxsize=None)
def gauss_hermite_nodes(m):
    """Nodes and weights for the integral of exp(-t**2) f(t) over the real line.

    Returned arrays are read-only and shared between callers.
    """
    if int(m) != m or not 1 <= m <= MAX_NODES:
        raise DomainError(f"Gauss-Hermite order must be in [1, {MAX_NODES}], got {m!r}")
    t, w = np.polynomial.hermite.hermgauss(int(m))
    # hermgauss is symmetric up to rounding; enforce exact antisymmetry
    t = 0.5 * (t - t[::-1])
    w = 0.5 * (w + w[::-1])
    t.setflags(write=False)
    w.setflags(write=False)
    return t, w


@functools.lru_cache(maxsize=None)
def _rule(m):
    t, w = gauss_hermite_nodes(m)
    with np.errstate(divide="ignore"):
        lw2 = np.log(w) + t * t
    lw2.setflags(write=False)
    return t, lw2


# -- vectorised evaluators used by the fitters -------------------------------

def ln_logpmf(y, eta, sigma2, m=40):
    """Poisson-lognormal log pmf for arrays ``y`` and ``eta`` (linear predictor)."""
    t, lw2 = _rule(m)
    return kernels.ln_logpmf_arr(np.asarray(y, dtype=float), np.asarray(eta, dtype=float),
                                 float(sigma2), t, lw2)


def ig_logpmf(y, mu, alpha, m=40):
    """Poisson-inverse-Gaussian log pmf for arrays ``y`` and ``mu``."""
    t, lw2 = _rule(m)
    return kernels.ig_logpmf_arr(np.asarray(y, dtype=float), np.asarray(mu, dtype=float),
                                 float(alpha), t, lw2)


def _with_doubling(evaluate, spec: QuadratureSpec):
    m = spec.node_count
    prev = evaluate(m)
    while 2 * m <= MAX_NODES:
        m *= 2
        cur = evaluate(m)
        if not (math.isfinite(prev) and math.isfinite(cur)):
            raise IntegrationError("non-finite quadrature value", (prev, cur))
        if abs(cur - prev) < spec.doubling_tolerance:
            return cur
        prev = cur
    raise IntegrationError(
        f"quadrature did not stabilise to {spec.doubling_tolerance:g} by {m} nodes", (prev, cur))


def marginal_ln_logpmf(y, eta, sigma2, spec: QuadratureSpec = DEFAULT_SPEC):
    """log P(y) when y | g ~ Poisson(exp(eta + g - sigma2/2)), g ~ N(0, sigma2).

    ``eta`` is the linear predictor x'beta, so E(y) = exp(eta).
    """
    y = _require_count(y)
    _require_positive(sigma2=sigma2)
    ya = np.array([float(y)])
    ea = np.array([float(eta)])
    return _with_doubling(lambda m: float(ln_logpmf(ya, ea, sigma2, m)[0]), spec)


def marginal_ig_logpmf(y, mu, alpha, spec: QuadratureSpec = DEFAULT_SPEC):
    """log P(y) when y | nu ~ Poisson(nu*mu), nu ~ inverse Gaussian(1, 1/alpha)."""
    y = _require_count(y)
    _require_positive(mu=mu, alpha=alpha)
    ya = np.array([float(y)])
    ma = np.array([float(mu)])
    return _with_doubling(lambda m: float(ig_logpmf(ya, ma, alpha, m)[0]), spec)


def marginal_gamma_logpmf_numeric(y, mu, tau, spec: QuadratureSpec = DEFAULT_SPEC):
    """Numerical integral of Poisson(y | nu*mu) against the gamma frailty density.

    Oracle for :func:`overdisp.dist.nb_logpmf`. In u = log(nu) the integrand
    has an exponential left tail with rate y + 1/tau, which Gauss-Hermite
    handles badly when that rate is below one. The tail is compressed with
    u = u0 + s*(v - exp(-v) + 1), which decays doubly exponentially in both
    directions, and the result is integrated by the trapezoid rule in v with
    step halving until ``spec.doubling_tolerance`` is met.
    """
    y = _require_count(y)
    _require_positive(mu=mu, tau=tau)
    dist = NuDistribution.gamma(tau)
    a = y + 1.0 / tau
    u0 = math.log(a / (mu + 1.0 / tau))
    s = 1.0 / math.sqrt(a)

    def log_integrand(v):
        ev = math.exp(-v)
        u = u0 + s * (v - ev + 1.0)
        nu = math.exp(u)
        if not (nu * mu > 0.0) or not math.isfinite(nu * mu):
            return -math.inf
        # poisson * frailty density * dnu/du * du/dv
        return (poisson_logpmf(y, nu * mu) + nu_logpdf(dist, nu) + u
                + math.log(s * (1.0 + ev)))

    peak = log_integrand(0.0)
    lo, hi = -1.0, 1.0
    while log_integrand(lo) > peak - 60.0:
        lo -= 1.0
    while log_integrand(hi) > peak - 60.0:
        hi += 1.0

    def trapezoid(h):
        n = int(math.ceil((hi - lo) / h))
        vals = np.array([log_integrand(lo + k * h) for k in range(n + 1)])
        vmax = vals.max()
        return vmax + math.log(h * np.exp(vals - vmax).sum())

    h = 0.1
    prev = trapezoid(h)
    for _ in range(6):
        h *= 0.5
        cur = trapezoid(h)
        if abs(cur - prev) < spec.doubling_tolerance:
            return cur
        prev = cur
    raise IntegrationError("gamma oracle did not stabilise", (prev, cur))
