import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import optimize, special

from overdisp.errors import DifferentiationError, SingularInformationError
from overdisp.kernels import nb_logpmf_arr
from overdisp.opt import cov_from_neg_hessian, hessian_fd, maximize
from overdisp.rng import RngStream
from overdisp.sim import CellConfig, generate_dataset
from overdisp.dist import NuDistribution


def test_maximize_1d():
    res = maximize(lambda x: -(x[0] - 3) ** 2, [0.0])
    assert res.converged
    assert abs(res.argmax[0] - 3) < 1e-6


def test_maximize_2d():
    res = maximize(lambda x: -(x[0] - 1) ** 2 - 10 * (x[1] + 2) ** 2, [0.0, 0.0])
    assert res.converged
    assert_allclose(res.argmax, [1, -2], atol=1e-5)
    assert np.isfinite(res.max_value)


def test_maximize_rosenbrock_and_permutation():
    def f(x):
        return -(1 - x[0]) ** 2 - 100 * (x[1] - x[0] ** 2) ** 2 - (x[2] - 0.5) ** 2
    x0 = np.array([-1.2, 1.0, 2.0])
    base = maximize(f, x0, max_iter=20000).argmax
    assert_allclose(base, [1, 1, 0.5], atol=1e-5)
    for perm in itertools.permutations(range(3)):
        perm = np.array(perm)
        inv = np.argsort(perm)
        res = maximize(lambda z: f(z[inv]), x0[perm], max_iter=20000)
        assert_allclose(res.argmax[inv], base, atol=1e-5)


def test_maximize_reports_failure_with_incumbent():
    res = maximize(lambda x: -(x[0] - 3) ** 2 - (x[1] + 1) ** 2, [0.0, 0.0], max_iter=5)
    assert not res.converged
    assert np.all(np.isfinite(res.argmax))
    assert "restart" in res.message


def test_maximize_treats_errors_as_minus_infinity():
    def f(x):
        if x[0] < 0:
            raise ValueError("outside")
        return -(x[0] - 0.5) ** 2
    res = maximize(f, [2.0])
    assert res.converged and abs(res.argmax[0] - 0.5) < 1e-6
    with pytest.raises(ValueError):
        maximize(lambda x: np.nan, [0.0])


def _nb_data(n=400, seed=3):
    cfg = CellConfig(NuDistribution.gamma(1.0), 0.3, n=n)
    return generate_dataset(cfg, RngStream(seed, cfg.stream_id, 0))


def _nb_loglik(data):
    y = data.y.astype(float)
    X = data.X

    def ll(theta):
        return float(np.sum(nb_logpmf_arr(y, np.exp(X @ theta[:2]), np.exp(theta[2]))))
    return ll


def test_maximize_nb_matches_grid_search():
    data = _nb_data()
    ll = _nb_loglik(data)
    res = maximize(ll, [0.5, 0.0, 0.0])
    assert res.converged
    # profile over beta1 on a 1e-4 lattice; inner optimum by scipy
    lattice = np.round(res.argmax[1] + np.arange(-30, 31) * 1e-4, 4)
    prof = []
    start = res.argmax[[0, 2]]
    for b1 in lattice:
        inner = optimize.minimize(lambda v: -ll(np.array([v[0], b1, v[1]])), start,
                                  method="BFGS", options={"gtol": 1e-9})
        prof.append(-inner.fun)
    best = lattice[int(np.argmax(prof))]
    assert abs(res.argmax[1] - best) < 2e-4
    # saturated two-group design: the NB mean MLE is the arm mean
    y0, y1 = data.y[data.X[:, 1] == 0], data.y[data.X[:, 1] == 1]
    assert abs(res.argmax[1] - np.log(y1.mean() / y0.mean())) < 1e-5


def test_hessian_fd_quadratics():
    H = hessian_fd(lambda v: -(v[0] ** 2 + 3 * v[1] ** 2), [0.0, 0.0])
    assert_allclose(H, np.diag([-2.0, -6.0]), atol=1e-5)
    A = np.array([[2.0, 0.3, -0.1], [0.3, 1.0, 0.2], [-0.1, 0.2, 0.5]])
    H = hessian_fd(lambda v: -v @ A @ v, [0.4, -1.0, 2.0])
    assert_allclose(H, -2 * A, atol=1e-4)
    assert np.array_equal(H, H.T)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_hessian_fd_exact_on_quadratics(x):
    # central differences have no truncation error on a quadratic; centring it
    # at x keeps f small, so the only error left is rounding of the steps
    A = np.array([[3.0, 1.0, 0.0], [1.0, 2.0, 0.5], [0.0, 0.5, 1.0]])
    x = np.array(x)
    H = hessian_fd(lambda v: -(v - x) @ A @ (v - x), x)
    assert_allclose(H, -2 * A, atol=1e-7)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3))
def test_hessian_fd_roundoff_bound(x):
    # away from the optimum the error is cancellation in f, ~eps*|f|/(h_i*h_j)
    A = np.array([[3.0, 1.0, 0.0], [1.0, 2.0, 0.5], [0.0, 0.5, 1.0]])
    b = np.array([1.0, -2.0, 0.5])
    x = np.array(x)
    f = lambda v: -v @ A @ v + b @ v + 7.0
    H = hessian_fd(f, x)
    h = 1e-4 * np.maximum(1.0, np.abs(x))
    bound = 16 * np.finfo(float).eps * (abs(f(x)) + 1.0) / np.outer(h, h)
    assert np.all(np.abs(H + 2 * A) <= bound)


def _nb_grad(data, theta):
    # analytic score of the NB log-likelihood in (beta, log tau)
    y = data.y.astype(float)
    X = data.X
    mu = np.exp(X @ theta[:2])
    tau = np.exp(theta[2])
    r = 1 / tau
    gb = X.T @ ((y - mu) / (1 + tau * mu))
    dtau = (y / tau + np.log1p(tau * mu) / tau ** 2 - (y + r) * mu / (1 + tau * mu)
            - (special.digamma(y + r) - special.digamma(r)) / tau ** 2)
    return np.concatenate([gb, [tau * dtau.sum()]])


def test_hessian_fd_matches_gradient_of_gradient():
    data = _nb_data()
    ll = _nb_loglik(data)
    x = maximize(ll, [0.5, 0.0, 0.0]).argmax
    H = hessian_fd(ll, x)
    h = 1e-5
    ref = np.empty((3, 3))
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        ref[:, i] = (_nb_grad(data, x + e) - _nb_grad(data, x - e)) / (2 * h)
    ref = 0.5 * (ref + ref.T)
    assert_allclose(H, ref, rtol=0, atol=1e-3)


def test_hessian_fd_non_finite():
    with pytest.raises(DifferentiationError):
        hessian_fd(lambda v: np.inf if v[0] > 0 else 0.0, [0.0])


def test_cov_from_neg_hessian_examples():
    assert_allclose(cov_from_neg_hessian(np.diag([-4.0, -25.0])), np.diag([0.25, 0.04]),
                    rtol=1e-15)
    assert_allclose(cov_from_neg_hessian(np.array([[-2.0, 1.0], [1.0, -2.0]])),
                    [[2 / 3, 1 / 3], [1 / 3, 2 / 3]], rtol=1e-14)
    rng = np.random.default_rng(4)
    for _ in range(20):
        M = rng.normal(size=(3, 3))
        H = -(M @ M.T + 0.1 * np.eye(3))
        C = cov_from_neg_hessian(H)
        assert_allclose(C @ -H, np.eye(3), atol=1e-10)
        assert np.array_equal(C, C.T)
        assert np.all(np.linalg.eigvalsh(C) > 0)


def test_cov_from_neg_hessian_rejects_indefinite():
    with pytest.raises(SingularInformationError):
        cov_from_neg_hessian(np.diag([-1.0, 2.0]))
    with pytest.raises(SingularInformationError):
        cov_from_neg_hessian(np.array([[np.nan, 0], [0, -1.0]]))
