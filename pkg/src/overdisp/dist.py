"""Densities, moments and samplers for Poisson mixtures with a mean-one
multiplicative frailty ``nu``.

Three frailty laws are supported, each with E(nu) = 1:

========  =========================  ================
variant   parameter                  Var(nu)
========  =========================  ================
gamma     tau  (shape 1/tau)         tau
lognormal sigma2 (nu = e^{g - s2/2}) exp(sigma2) - 1
invgauss  alpha (shape 1/alpha)      alpha
========  =========================  ================

All densities are returned on the log scale.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DomainError
from .kernels import _scalar
from .rng import RngStream

LOG_2PI = _scalar.LOG_2PI
POISSON_MAX_LAM = 1e9


class Variant(str, enum.Enum):
    GAMMA = "gamma"
    LOGNORMAL = "lognormal"
    INVGAUSS = "invgauss"

    @property
    def method(self):
        """Tag of the likelihood method that assumes this frailty law."""
        return _METHOD_TAG[self]

    @property
    def param_name(self):
        return _PARAM_NAME[self]


_METHOD_TAG = {Variant.GAMMA: "GM", Variant.LOGNORMAL: "LN", Variant.INVGAUSS: "IG"}
_PARAM_NAME = {Variant.GAMMA: "tau", Variant.LOGNORMAL: "sigma2", Variant.INVGAUSS: "alpha"}
_ALIASES = {
    "gamma": Variant.GAMMA, "gm": Variant.GAMMA,
    "lognormal": Variant.LOGNORMAL, "ln": Variant.LOGNORMAL,
    "invgauss": Variant.INVGAUSS, "inverse_gaussian": Variant.INVGAUSS,
    "inversegaussian": Variant.INVGAUSS, "ig": Variant.INVGAUSS,
}


def parse_variant(name):
    try:
        return _ALIASES[str(name).strip().lower().replace("-", "_")]
    except KeyError:
        raise DomainError(f"unknown frailty distribution {name!r}") from None


@dataclass(frozen=True)
class NuDistribution:
    """A mean-one frailty law.

    ``param == 0`` is accepted as the degenerate law nu = 1 (pure Poisson); it
    has moments and can be sampled but has no density.
    """

    variant: Variant
    param: float

    def __post_init__(self):
        object.__setattr__(self, "variant", parse_variant(self.variant)
                           if not isinstance(self.variant, Variant) else self.variant)
        p = float(self.param)
        if not (p >= 0.0 and math.isfinite(p)):
            raise DomainError(f"frailty parameter must be finite and >= 0, got {self.param!r}")
        object.__setattr__(self, "param", p)

    @property
    def variance(self):
        """Var(nu)."""
        if self.variant is Variant.LOGNORMAL:
            return math.expm1(self.param)
        return self.param

    @property
    def degenerate(self):
        return self.param == 0.0

    @classmethod
    def gamma(cls, tau):
        return cls(Variant.GAMMA, tau)

    @classmethod
    def lognormal(cls, sigma2):
        return cls(Variant.LOGNORMAL, sigma2)

    @classmethod
    def invgauss(cls, alpha):
        return cls(Variant.INVGAUSS, alpha)


def _require_positive(**kw):
    for name, v in kw.items():
        if not (v > 0.0) or not math.isfinite(v):
            raise DomainError(f"{name} must be positive and finite, got {v!r}")


def _require_count(y):
    if isinstance(y, bool) or int(y) != y or y < 0:
        raise DomainError(f"count must be a non-negative integer, got {y!r}")
    return int(y)


def log_gamma(x):
    """ln Gamma(x) by a 14-term Lanczos series (g = 607/128)."""
    x = float(x)
    if not (x > 0.0) or not math.isfinite(x):
        raise DomainError(f"log_gamma needs a positive finite argument, got {x!r}")
    return _scalar.lanczos_lgamma(x)


def poisson_logpmf(y, lam):
    y = _require_count(y)
    _require_positive(lam=lam)
    return y * math.log(lam) - lam - _scalar.lanczos_lgamma(y + 1.0)


def nb_logpmf(y, mu, tau):
    """Negative binomial log pmf with mean ``mu`` and Var = mu + tau*mu**2."""
    y = _require_count(y)
    _require_positive(mu=mu, tau=tau)
    return _scalar.nb_logpmf(y, float(mu), float(tau))


def invgauss_logpdf(nu, alpha):
    """Inverse Gaussian log density with mean 1 and shape 1/alpha."""
    _require_positive(nu=nu, alpha=alpha)
    head = -0.5 * (math.log(2.0 * math.pi * alpha) + 3.0 * math.log(nu))
    try:
        return head - (nu - 1.0) ** 2 / (2.0 * alpha * nu)
    except OverflowError:
        # tiny nu: the exponent runs past the float range
        return -math.inf


def nu_logpdf(dist: NuDistribution, nu):
    _require_positive(nu=nu)
    if dist.degenerate:
        raise DomainError("degenerate frailty (param = 0) has no density")
    p = dist.param
    if dist.variant is Variant.GAMMA:
        a = 1.0 / p
        return -_scalar.lanczos_lgamma(a) - a * math.log(p) + (a - 1.0) * math.log(nu) - nu / p
    if dist.variant is Variant.LOGNORMAL:
        ln_nu = math.log(nu)
        return -ln_nu - 0.5 * (LOG_2PI + math.log(p)) - (ln_nu + 0.5 * p) ** 2 / (2.0 * p)
    return invgauss_logpdf(nu, p)


def moments(dist: NuDistribution, mu):
    """Marginal (E y, Var y) for y | nu ~ Poisson(nu * mu)."""
    _require_positive(mu=mu)
    return mu, mu + dist.variance * mu * mu


def matched_params(c):
    """(tau, sigma2, alpha) giving Var(nu) = c under each frailty law."""
    _require_positive(c=c)
    return c, math.log1p(c), c


# -- samplers ---------------------------------------------------------------

def _gamma_variate(shape, rng: RngStream):
    # Marsaglia & Tsang (2000); shape < 1 boosted by U**(1/shape)
    if shape < 1.0:
        g = _gamma_variate(shape + 1.0, rng)
        return g * math.exp(math.log(rng.uniform()) / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        x = rng.normal()
        v = 1.0 + c * x
        if v <= 0.0:
            continue
        v = v * v * v
        u = rng.uniform()
        if u < 1.0 - 0.0331 * x ** 4:
            return d * v
        if math.log(u) < 0.5 * x * x + d * (1.0 - v + math.log(v)):
            return d * v


def _invgauss_variate(alpha, rng: RngStream):
    # Michael, Schucany & Haas (1976) with mean 1, shape lam = 1/alpha
    lam = 1.0 / alpha
    z = rng.normal()
    w = z * z
    root = math.sqrt(w * w + 4.0 * lam * w)
    # smaller root of the quadratic, written without cancellation
    x = 4.0 * lam * w / (root + w) ** 2 if w > 0.0 else 1.0
    if rng.uniform() <= 1.0 / (1.0 + x):
        return x
    return 1.0 / x


def sample_nu(dist: NuDistribution, rng: RngStream):
    """One frailty draw with E = 1 and Var = dist.variance."""
    if dist.degenerate:
        return 1.0
    p = dist.param
    if dist.variant is Variant.GAMMA:
        return p * _gamma_variate(1.0 / p, rng)
    if dist.variant is Variant.LOGNORMAL:
        return math.exp(math.sqrt(p) * rng.normal() - 0.5 * p)
    return _invgauss_variate(p, rng)


def sample_poisson(lam, rng: RngStream):
    """Poisson draw: sequential inversion below 30, PTRS (Hormann 1993) above."""
    if not (lam > 0.0) or not math.isfinite(lam):
        raise DomainError(f"Poisson rate must be positive and finite, got {lam!r}")
    if lam > POISSON_MAX_LAM:
        raise DomainError(f"Poisson rate {lam!r} exceeds {POISSON_MAX_LAM:g}")
    if lam < 30.0:
        u = rng.uniform()
        k = 0
        p = math.exp(-lam)
        cdf = p
        while u > cdf:
            k += 1
            p *= lam / k
            cdf += p
            if p == 0.0 and cdf < u:
                # u fell in the rounding gap at the top of the cdf
                break
        return k
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = rng.uniform() - 0.5
        v = rng.uniform()
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= v_r:
            return int(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                <= -lam + k * loglam - _scalar.lanczos_lgamma(k + 1.0)):
            return int(k)
