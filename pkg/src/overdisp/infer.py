"""Regression estimators for overdispersed counts with a log link.

Five methods share the Poisson point estimates or extend the Poisson
likelihood with a frailty:

* ``GM`` - gamma frailty (negative binomial), closed-form likelihood
* ``LN`` - lognormal frailty, quadrature likelihood
* ``IG`` - inverse Gaussian frailty, quadrature likelihood
* ``RS`` - Poisson estimates with a sandwich covariance
* ``QL`` - Poisson estimates with standard errors scaled by sqrt(phi)

The mixture fits maximise the joint log-likelihood in (beta, log dispersion)
by Nelder-Mead and take standard errors from the observed information
(central-difference Hessian). Wald tests use the standard normal reference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, quad
from .dist import matched_params
from .errors import (DegenerateDataError, DifferentiationError, DomainError,
                     SingularInformationError)
from .opt import cov_from_neg_hessian, hessian_fd, maximize

METHODS = ("GM", "LN", "IG", "RS", "QL")
LIKELIHOOD_METHODS = ("GM", "LN", "IG")
MIN_DISPERSION = 1e-6
QL_PHI_FLOOR = 1e-8
# quadrature fits must be stable to this under node doubling at the optimum
NODE_DOUBLING_TOL = 1e-6


@dataclass(frozen=True)
class Dataset:
    """Counts ``y`` (length n) and an n x p design ``X`` whose first column is 1."""

    y: np.ndarray
    X: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        y = np.asarray(self.y)
        if y.ndim != 1:
            raise DomainError("y must be one-dimensional")
        yf = y.astype(float)
        if not np.all(np.isfinite(yf)) or np.any(yf < 0) or np.any(yf != np.round(yf)):
            raise DomainError("y must contain non-negative integers")
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.shape[0] != y.shape[0]:
            raise DomainError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if not np.all(np.isfinite(X)):
            raise DomainError("X must be finite")
        n, p = X.shape
        if n < p or p < 1:
            raise DegenerateDataError(f"need n >= p >= 1, got n={n}, p={p}")
        names = tuple(self.names) or ("intercept",) + tuple(f"x{j}" for j in range(1, p))
        if len(names) != p:
            raise DomainError("names must match the number of columns of X")
        y = yf.astype(np.int64)
        y.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "names", names)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @classmethod
    def two_group(cls, y_control, y_treated):
        """Intercept plus a 0/1 treatment indicator."""
        y0 = np.asarray(y_control)
        y1 = np.asarray(y_treated)
        x = np.concatenate([np.zeros(y0.size), np.ones(y1.size)])
        return cls(np.concatenate([y0, y1]), np.column_stack([np.ones(x.size), x]),
                   ("intercept", "treatment"))


@dataclass
class FitResult:
    method: str
    beta: np.ndarray
    se: np.ndarray
    cov: np.ndarray | None = None
    dispersion: float | None = None
    neg2_loglik: float | None = None
    converged: bool = True
    near_poisson: bool = False
    iterations: int = 0
    message: str = ""
    names: tuple = field(default=())

    @property
    def loglik(self):
        return None if self.neg2_loglik is None else -0.5 * self.neg2_loglik


@dataclass(frozen=True)
class FitOptions:
    """Knobs that the estimators expose for sensitivity analyses."""

    quad: quad.QuadratureSpec = quad.DEFAULT_SPEC
    ql_scale: str = "deviance"          # or "pearson"
    sandwich_correction: bool = False   # multiply RS covariance by n/(n-p)
    tol: float = 1e-10
    max_iter: int = 5000


DEFAULT_OPTIONS = FitOptions()


def _failed(method, p, names, message, iterations=0):
    nan = np.full(p, np.nan)
    return FitResult(method, nan.copy(), nan.copy(), None, None, None, False, False,
                     iterations, message, names)


# -- Poisson ----------------------------------------------------------------

def _poisson_loglik(y, X, beta):
    eta = X @ beta
    return float(np.sum(y * eta - np.exp(eta)) - np.sum(kernels.lgamma_arr(y + 1.0)))


def fit_poisson(data: Dataset, options: FitOptions = DEFAULT_OPTIONS) -> FitResult:
    """Poisson MLE by Newton-Raphson with step halving."""
    y = data.y.astype(float)
    X = data.X
    if np.linalg.matrix_rank(X) < data.p:
        raise DegenerateDataError("design matrix is rank deficient")
    if y.sum() == 0:
        raise DegenerateDataError("all counts are zero; the Poisson MLE does not exist")
    # a column that is zero wherever y > 0 and one-signed elsewhere separates
    pos = y > 0
    for j in range(1, data.p):
        col = X[:, j]
        if np.all(col[pos] == 0) and (np.all(col >= 0) or np.all(col <= 0)) and np.any(col != 0):
            raise DegenerateDataError(f"column {data.names[j]!r} separates the zero counts")
    beta = np.zeros(data.p)
    beta[0] = math.log(y.mean())
    ll = _poisson_loglik(y, X, beta)
    for it in range(1, 101):
        mu = np.exp(X @ beta)
        score = X.T @ (y - mu)
        info = (X * mu[:, None]).T @ X
        delta = np.linalg.solve(info, score)
        t = 1.0
        while True:
            cand = beta + t * delta
            ll_c = _poisson_loglik(y, X, cand)
            if ll_c >= ll - 1e-12 * abs(ll) or t < 1e-10:
                break
            t *= 0.5
        beta, ll = cand, ll_c
        if np.max(np.abs(beta)) > 50:
            raise DegenerateDataError("Poisson coefficients diverge (separation)")
        if np.max(np.abs(t * delta)) < 1e-12:
            break
    mu = np.exp(X @ beta)
    info = (X * mu[:, None]).T @ X
    cov = cov_from_neg_hessian(-info)
    return FitResult("POISSON", beta, np.sqrt(np.diag(cov)), cov, None, -2.0 * ll,
                     True, False, it, "converged", data.names)


# -- sandwich and quasi-likelihood -----------------------------------------

def _poisson_base(data, poisson):
    if poisson is None:
        poisson = fit_poisson(data)
    if poisson.method != "POISSON":
        raise ValueError("poisson must be a POISSON fit")
    return poisson


def fit_rs(data: Dataset, poisson: FitResult | None = None,
           options: FitOptions = DEFAULT_OPTIONS) -> FitResult:
    """Poisson estimates with covariance A^-1 B A^-1.

    A = sum x x' mu (working information), B = sum x x' (y - mu)^2.
    """
    poisson = _poisson_base(data, poisson)
    beta = poisson.beta
    X = data.X
    mu = np.exp(X @ beta)
    r2 = (data.y - mu) ** 2
    A = (X * mu[:, None]).T @ X
    B = (X * r2[:, None]).T @ X
    try:
        Ainv = cov_from_neg_hessian(-A)
    except SingularInformationError as exc:
        raise DegenerateDataError("working information is singular") from exc
    cov = Ainv @ B @ Ainv
    cov = 0.5 * (cov + cov.T)
    if options.sandwich_correction:
        cov = cov * data.n / (data.n - data.p)
    se = np.sqrt(np.diag(cov))
    fit = FitResult("RS", beta, se, cov, None, None, bool(np.all(se > 0)), False,
                    poisson.iterations, "converged", data.names)
    assert fit.beta is poisson.beta
    return fit


def poisson_deviance(y, mu):
    y = np.asarray(y, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(2.0 * np.sum(term - (y - mu)))


def fit_ql(data: Dataset, poisson: FitResult | None = None,
           options: FitOptions = DEFAULT_OPTIONS) -> FitResult:
    """Poisson estimates with standard errors scaled by sqrt(phi).

    phi = D / (n - p) with D the Poisson deviance; ``options.ql_scale =
    "pearson"`` uses the Pearson chi-square instead.
    """
    if data.n <= data.p:
        raise DegenerateDataError("quasi-likelihood scale needs n > p")
    poisson = _poisson_base(data, poisson)
    mu = np.exp(data.X @ poisson.beta)
    if options.ql_scale == "deviance":
        stat = poisson_deviance(data.y, mu)
    elif options.ql_scale == "pearson":
        stat = float(np.sum((data.y - mu) ** 2 / mu))
    else:
        raise ValueError(f"unknown ql_scale {options.ql_scale!r}")
    phi = stat / (data.n - data.p)
    near = phi < QL_PHI_FLOOR
    if near:
        phi = QL_PHI_FLOOR
    fit = FitResult("QL", poisson.beta, math.sqrt(phi) * poisson.se, phi * poisson.cov, phi,
                    None, True, near, poisson.iterations, "converged", data.names)
    assert fit.beta is poisson.beta
    return fit


# -- mixture likelihoods ----------------------------------------------------

class _Compressed:
    """Distinct (x, y) rows with multiplicities; the likelihood is a weighted sum."""

    def __init__(self, data: Dataset):
        rows = np.column_stack([data.X, data.y.astype(float)])
        uniq, counts = np.unique(rows, axis=0, return_counts=True)
        self.X = np.ascontiguousarray(uniq[:, :-1])
        self.y = np.ascontiguousarray(uniq[:, -1])
        self.w = counts.astype(float)


def _gm_terms(c, beta, disp, m):
    return kernels.nb_logpmf_arr(c.y, np.exp(c.X @ beta), disp)


def _ln_terms(c, beta, disp, m):
    return quad.ln_logpmf(c.y, c.X @ beta, disp, m)


def _ig_terms(c, beta, disp, m):
    return quad.ig_logpmf(c.y, np.exp(c.X @ beta), disp, m)


_TERMS = {"GM": (_gm_terms, 0), "LN": (_ln_terms, 1), "IG": (_ig_terms, 2)}


def moment_dispersion(data: Dataset, poisson: FitResult):
    """Method-of-moments Var(nu): max(1e-4, (s2/ybar - 1)/ybar), s2 pooled about the fit."""
    mu = np.exp(data.X @ poisson.beta)
    s2 = float(np.sum((data.y - mu) ** 2)) / max(data.n - data.p, 1)
    ybar = float(np.mean(data.y))
    return max(1e-4, (s2 / ybar - 1.0) / ybar)


def mixture_loglik(method, data: Dataset, beta, dispersion, node_count=40):
    """Total log-likelihood of a GM / LN / IG model at given parameters."""
    terms, _ = _TERMS[method]
    y = data.y.astype(float)
    c = _Compressed.__new__(_Compressed)
    c.X, c.y, c.w = data.X, y, np.ones_like(y)
    return float(np.sum(terms(c, np.asarray(beta, dtype=float), float(dispersion), node_count)))


def _fit_mixture(method, data: Dataset, poisson: FitResult | None, options: FitOptions):
    poisson = _poisson_base(data, poisson)
    terms, which = _TERMS[method]
    comp = _Compressed(data)
    p = data.p
    log_floor = math.log(MIN_DISPERSION)
    c0 = moment_dispersion(data, poisson)
    l0 = max(math.log(matched_params(c0)[which]), log_floor + 1.0)

    # optimise in standardised coordinates: beta = beta_pois + se_pois * z
    origin = np.append(poisson.beta, l0)
    scale = np.append(poisson.se, 1.0)
    m = options.quad.node_count

    def loglik_theta(theta, nodes):
        beta, l = theta[:p], theta[p]
        pen = 0.0
        if l < log_floor:
            pen = (log_floor - l) ** 2
            l = log_floor
        v = terms(comp, beta, math.exp(l), nodes)
        return float(comp.w @ v) - pen

    def solve(nodes, start):
        def f(z):
            return loglik_theta(origin + scale * z, nodes)
        res = maximize(f, start, tol=options.tol, max_iter=options.max_iter, step=1.0)
        return res, f

    def information_cov(res, nodes):
        # curvature in the natural parameters (beta, log dispersion): the
        # standardised coordinates shrink the beta steps by se_pois and let
        # rounding noise dominate the finite differences
        theta = origin + scale * res.argmax
        if theta[p] <= log_floor + 1e-6:
            H = hessian_fd(lambda b: loglik_theta(np.append(b, log_floor), nodes), theta[:p])
            return theta, True, cov_from_neg_hessian(H)
        H = hessian_fd(lambda t: loglik_theta(t, nodes), theta)
        return theta, False, cov_from_neg_hessian(H)[:p, :p]

    res, f = solve(m, np.zeros(p + 1))
    restarted = False
    while True:
        if not res.converged:
            return _failed(method, p, data.names, res.message, res.iterations)
        try:
            theta, near, cov = information_cov(res, m)
            break
        except (SingularInformationError, DifferentiationError) as exc:
            if restarted:
                return _failed(method, p, data.names, f"information not usable: {exc}",
                               res.iterations)
            restarted = True
            res2 = maximize(f, res.argmax, tol=options.tol, max_iter=options.max_iter, step=1.0)
            res2.iterations += res.iterations
            res = res2

    if method != "GM":
        # node doubling at the optimum; refine the rule if needed
        while True:
            beta, disp = theta[:p], max(math.exp(theta[p]), MIN_DISPERSION)
            diff = np.max(np.abs(terms(comp, beta, disp, m) - terms(comp, beta, disp, 2 * m)))
            if diff < NODE_DOUBLING_TOL:
                break
            if 4 * m > quad.MAX_NODES:
                return _failed(method, p, data.names,
                               f"quadrature unstable under node doubling ({diff:.2e})",
                               res.iterations)
            m *= 2
            res, f = solve(m, res.argmax)
            if not res.converged:
                return _failed(method, p, data.names, res.message, res.iterations)
            try:
                theta, near, cov = information_cov(res, m)
            except (SingularInformationError, DifferentiationError) as exc:
                return _failed(method, p, data.names, f"information not usable: {exc}",
                               res.iterations)

    beta = theta[:p].copy()
    disp = MIN_DISPERSION if near else math.exp(theta[p])
    ll = loglik_theta(np.append(beta, math.log(disp)), m)
    se = np.sqrt(np.diag(cov))
    return FitResult(method, beta, se, cov, disp, -2.0 * ll, True, bool(near),
                     res.iterations, res.message, data.names)


def fit_gm(data: Dataset, poisson: FitResult | None = None,
           options: FitOptions = DEFAULT_OPTIONS) -> FitResult:
    """Negative binomial (gamma frailty) MLE; dispersion is tau = Var(nu)."""
    return _fit_mixture("GM", data, poisson, options)


def fit_ln(data: Dataset, poisson: FitResult | None = None,
           options: FitOptions = DEFAULT_OPTIONS) -> FitResult:
    """Lognormal-frailty MLE; dispersion is sigma2.

    The frailty is exp(g - sigma2/2), so exp(x'beta) is the marginal mean and
    beta is directly comparable with the other methods.
    """
    return _fit_mixture("LN", data, poisson, options)


def fit_ig(data: Dataset, poisson: FitResult | None = None,
           options: FitOptions = DEFAULT_OPTIONS) -> FitResult:
    """Inverse-Gaussian-frailty MLE; dispersion is alpha = Var(nu)."""
    return _fit_mixture("IG", data, poisson, options)


FITTERS = {"GM": fit_gm, "LN": fit_ln, "IG": fit_ig, "RS": fit_rs, "QL": fit_ql}


def fit(method, data: Dataset, poisson: FitResult | None = None,
        options: FitOptions = DEFAULT_OPTIONS) -> FitResult:
    method = method.upper()
    if method == "POISSON":
        return fit_poisson(data, options) if poisson is None else poisson
    try:
        fitter = FITTERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}") from None
    return fitter(data, poisson, options)


# -- inference --------------------------------------------------------------

def wald_p(fit: FitResult, index=1):
    """(z, two-sided p) for H0: beta[index] = 0 against N(0, 1)."""
    if not fit.converged:
        raise ValueError(f"{fit.method} fit did not converge")
    se = float(fit.se[index])
    if not (se > 0) or not math.isfinite(se):
        raise ValueError(f"standard error must be positive, got {se!r}")
    z = float(fit.beta[index]) / se
    return z, math.erfc(abs(z) / math.sqrt(2.0))


@dataclass
class Ranking:
    order: list
    beats: dict

    def rate_key(self, a, b):
        return self.beats.get((a, b))


def compare_neg2ll(fits) -> Ranking:
    """Order likelihood fits by -2 log L and record pairwise strict wins.

    ``beats[(a, b)]`` is True when a's -2LL is strictly smaller than b's,
    False otherwise, and None when either value is missing.
    """
    if isinstance(fits, dict):
        fits = list(fits.values())
    table = {}
    for f in fits:
        ok = f.converged and f.neg2_loglik is not None and math.isfinite(f.neg2_loglik)
        table[f.method] = f.neg2_loglik if ok else None
    avail = [k for k, v in table.items() if v is not None]
    order = sorted(avail, key=lambda k: table[k])
    beats = {}
    for a in table:
        for b in table:
            if a == b:
                continue
            if table[a] is None or table[b] is None:
                beats[(a, b)] = None
            else:
                beats[(a, b)] = table[a] < table[b]
    return Ranking(order, beats)
