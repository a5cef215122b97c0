import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, stats

from overdisp.dist import (NuDistribution, Variant, invgauss_logpdf, log_gamma, matched_params,
                           moments, nb_logpmf, nu_logpdf, parse_variant, poisson_logpmf,
                           sample_nu, sample_poisson)
from overdisp.errors import DomainError
from overdisp.rng import RngStream

GRID = [NuDistribution.gamma(c) for c in (0.5, 1, 2, 4, 6)] + \
       [NuDistribution.lognormal(s) for s in (0.405, 0.693, 1.098, 1.609, 1.946)] + \
       [NuDistribution.invgauss(a) for a in (0.5, 1, 2, 4, 6)]


# -- log_gamma ----------------------------------------------------------------

def test_log_gamma_examples():
    assert log_gamma(1.0) == pytest.approx(0.0, abs=1e-15)
    assert_allclose(log_gamma(0.5), 0.5 * math.log(math.pi), rtol=0, atol=1e-14)
    assert_allclose(log_gamma(10.0), math.log(math.factorial(9)), rtol=0, atol=1e-12)


def test_log_gamma_against_mpmath():
    # absolute error below 1e-12 where |lnG| <= 1, relative beyond that: float64
    # cannot hold lnG(1e6) ~ 1.3e7 to an absolute 1e-12
    xs = np.concatenate([np.geomspace(1e-3, 1e6, 400), [0.5, 1.5, 2.0, 2.5, 7.0, 171.3]])
    for x in xs:
        ref = float(mpmath.loggamma(mpmath.mpf(float(x))))
        assert abs(log_gamma(x) - ref) <= 1e-12 * max(1.0, abs(ref)), x


@pytest.mark.parametrize("x", [0.0, -1.0, math.inf, math.nan])
def test_log_gamma_domain(x):
    with pytest.raises(DomainError):
        log_gamma(x)


# -- pmfs ---------------------------------------------------------------------

def test_poisson_logpmf_examples():
    assert poisson_logpmf(0, 2.0) == pytest.approx(-2.0, abs=1e-15)
    assert_allclose(poisson_logpmf(2, 2.0), math.log(0.2706705664732254), rtol=1e-14)
    brute = 3.5 ** 7 * math.exp(-3.5) / 5040
    assert_allclose(poisson_logpmf(7, 3.5), math.log(brute), rtol=1e-14)
    with pytest.raises(DomainError):
        poisson_logpmf(1, 0.0)
    with pytest.raises(DomainError):
        poisson_logpmf(-1, 1.0)


def test_nb_logpmf_examples():
    assert_allclose(nb_logpmf(0, 2.0, 0.5), math.log(0.25), rtol=1e-14)
    assert_allclose(nb_logpmf(1, 2.0, 0.5), math.log(0.25), rtol=1e-14)
    assert abs(nb_logpmf(3, 2.0, 1e-8) - poisson_logpmf(3, 2.0)) < 1e-6
    for bad in [(1, 0.0, 1.0), (1, 1.0, 0.0), (1, -1.0, 1.0)]:
        with pytest.raises(DomainError):
            nb_logpmf(*bad)


@settings(max_examples=200, deadline=None)
@given(y=st.integers(0, 500), mu=st.floats(1e-3, 1e3), tau=st.floats(1e-3, 50.0))
def test_nb_logpmf_matches_scipy(y, mu, tau):
    ref = stats.nbinom.logpmf(y, 1.0 / tau, 1.0 / (1.0 + tau * mu))
    assert_allclose(nb_logpmf(y, mu, tau), ref, rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("mu", [0.5, 2.0, 10.0])
@pytest.mark.parametrize("tau", [0.1, 1.0, 6.0])
def test_nb_normalizes(mu, tau):
    total, y = 0.0, 0
    while True:
        p = math.exp(nb_logpmf(y, mu, tau))
        total += p
        # geometric tail bound once past the mode
        ratio = (y + 1 + 1 / tau) / (y + 1) * tau * mu / (1 + tau * mu)
        if y > mu and ratio < 1 and p * ratio / (1 - ratio) < 1e-10:
            break
        y += 1
    assert abs(total - 1.0) < 1e-8


def test_nb_poisson_limit():
    for y in range(31):
        assert abs(nb_logpmf(y, 2.0, 1e-8) - poisson_logpmf(y, 2.0)) < 1e-5


def test_invgauss_logpdf():
    assert_allclose(invgauss_logpdf(1.0, 0.5), -0.5 * math.log(math.pi), rtol=1e-15)
    # high-resolution trapezoid in u = log(nu)
    u = np.linspace(-40, 8, 2_000_001)
    for alpha in (0.5, 2.0):
        dens = np.exp([invgauss_logpdf(math.exp(v), alpha) + v for v in u[::100]])
        du = u[100] - u[0]
        assert abs(integrate.trapezoid(dens, dx=du) - 1.0) < 1e-8
    dens = np.exp([invgauss_logpdf(math.exp(v), 2.0) + 2 * v for v in u[::100]])
    assert abs(integrate.trapezoid(dens, dx=u[100] - u[0]) - 1.0) < 1e-6
    with pytest.raises(DomainError):
        invgauss_logpdf(0.0, 1.0)


def test_nu_logpdf_examples():
    assert_allclose(nu_logpdf(NuDistribution.gamma(1.0), 1.0), -1.0, rtol=1e-14)
    d = NuDistribution.invgauss(0.5)
    assert nu_logpdf(d, 1.0) == invgauss_logpdf(1.0, 0.5)
    ln = NuDistribution.lognormal(0.405)
    m1 = _nu_moment(ln, 1)
    m2 = _nu_moment(ln, 2)
    assert abs(m1 - 1) < 1e-3
    assert abs(m2 - m1 ** 2 - 0.499) < 1e-3
    with pytest.raises(DomainError):
        nu_logpdf(d, -1.0)


def _nu_moment(dist, k):
    def f(u):
        if abs(u) > 700:
            return 0.0
        return math.exp(nu_logpdf(dist, math.exp(u)) + (k + 1) * u)

    parts = [-np.inf, -5, -1, 0, 1, 3, np.inf]
    return sum(integrate.quad(f, a, b, epsabs=1e-13, epsrel=1e-13, limit=400)[0]
               for a, b in zip(parts[:-1], parts[1:]))


@pytest.mark.parametrize("dist", GRID, ids=lambda d: f"{d.variant.value}-{d.param}")
def test_nu_moments_by_integration(dist):
    assert abs(_nu_moment(dist, 0) - 1) < 1e-6
    m1 = _nu_moment(dist, 1)
    assert abs(m1 - 1) < 1e-6
    assert abs(_nu_moment(dist, 2) - m1 ** 2 - dist.variance) < 1e-5


def test_moments_examples():
    assert moments(NuDistribution.gamma(0.5), 2.0) == (2.0, 4.0)
    m, v = moments(NuDistribution.lognormal(0.693), 2.0)
    assert m == 2.0 and abs(v - 6.0) < 0.01
    assert moments(NuDistribution.invgauss(0.0), 3.0) == (3.0, 3.0)


def test_matched_params():
    for c, s2 in [(0.5, 0.405), (1.0, 0.693), (6.0, 1.946)]:
        tau, sigma2, alpha = matched_params(c)
        assert tau == c and alpha == c
        assert round(sigma2, 3) == s2


@given(st.floats(1e-4, 100.0), st.floats(1e-3, 1e3))
def test_matched_params_give_equal_variance(c, mu):
    tau, s2, alpha = matched_params(c)
    vg = moments(NuDistribution.gamma(tau), mu)[1]
    vl = moments(NuDistribution.lognormal(s2), mu)[1]
    vi = moments(NuDistribution.invgauss(alpha), mu)[1]
    assert vg == vi
    assert abs(vl - vg) <= 1e-12 * vg


def test_nu_distribution_validation():
    with pytest.raises(DomainError):
        NuDistribution.gamma(-1.0)
    with pytest.raises(DomainError):
        NuDistribution.lognormal(math.nan)
    assert parse_variant("LN") is Variant.LOGNORMAL
    assert parse_variant("inverse_gaussian") is Variant.INVGAUSS
    with pytest.raises(DomainError):
        parse_variant("weibull")


# -- samplers -----------------------------------------------------------------

def _draws(dist, n, seed=11):
    rng = RngStream(seed, 1, 0)
    return np.array([sample_nu(dist, rng) for _ in range(n)])


def test_sample_gamma_moments():
    x = _draws(NuDistribution.gamma(2.0), 10 ** 6)
    assert abs(x.mean() - 1) < 0.01
    assert abs(x.var() - 2) < 0.1


def test_sample_lognormal_variance():
    x = _draws(NuDistribution.lognormal(1.098), 10 ** 6)
    target = math.expm1(1.098)
    assert abs(x.var() / target - 1) < 0.05


def test_sample_invgauss_mean():
    x = _draws(NuDistribution.invgauss(4.0), 10 ** 6)
    assert abs(x.mean() - 1) < 0.02


@pytest.mark.parametrize("tau", [0.5, 2.0, 6.0])
def test_sample_gamma_ks(tau):
    x = _draws(NuDistribution.gamma(tau), 10 ** 4, seed=2024)
    assert stats.kstest(x, stats.gamma(1 / tau, scale=tau).cdf).pvalue > 0.001


@pytest.mark.parametrize("alpha", [0.5, 6.0])
def test_sample_invgauss_ks(alpha):
    x = _draws(NuDistribution.invgauss(alpha), 10 ** 4, seed=2025)
    # scipy's invgauss(mu, scale) has mean mu*scale and shape scale
    ref = stats.invgauss(alpha, scale=1 / alpha)
    assert stats.kstest(x, ref.cdf).pvalue > 0.001


def test_sample_degenerate():
    rng = RngStream(0)
    assert sample_nu(NuDistribution.gamma(0.0), rng) == 1.0


def test_sample_poisson_moments():
    rng = RngStream(5, 2, 0)
    x = np.array([sample_poisson(2.0, rng) for _ in range(10 ** 6)])
    assert abs(x.mean() - 2) < 0.01
    x = np.array([sample_poisson(30.0, rng) for _ in range(10 ** 6)])
    assert abs(x.var() - 30) < 0.5
    x = np.array([sample_poisson(1e-4, rng) for _ in range(10 ** 5)])
    assert abs(np.mean(x == 0) - math.exp(-1e-4)) < 3e-4


@pytest.mark.parametrize("lam", [0.7, 12.0, 45.0, 400.0])
def test_sample_poisson_distribution(lam):
    rng = RngStream(9, int(lam * 10), 0)
    x = np.array([sample_poisson(lam, rng) for _ in range(20000)])
    lo, hi = int(stats.poisson.ppf(1e-4, lam)), int(stats.poisson.ppf(1 - 1e-4, lam))
    edges = np.arange(lo, hi + 2)
    obs = np.histogram(np.clip(x, lo, hi), bins=edges)[0]
    exp = np.diff(stats.poisson.cdf(edges - 1, lam))
    exp[0] += stats.poisson.cdf(lo - 1, lam)
    exp[-1] += stats.poisson.sf(hi, lam)
    exp = exp / exp.sum() * obs.sum()
    keep = exp > 5
    chi2 = np.sum((obs[keep] - exp[keep]) ** 2 / exp[keep])
    assert stats.chi2.sf(chi2, keep.sum() - 1) > 0.001


def test_sample_poisson_guards():
    rng = RngStream(0)
    for bad in (0.0, -1.0, math.inf, 2e9):
        with pytest.raises(DomainError):
            sample_poisson(bad, rng)


def test_samplers_deterministic():
    a = _draws(NuDistribution.invgauss(2.0), 100, seed=3)
    b = _draws(NuDistribution.invgauss(2.0), 100, seed=3)
    assert np.array_equal(a, b)
