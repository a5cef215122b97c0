"""Derivative-free maximisation and finite-difference curvature.

Quadrature likelihoods carry ~1e-8 relative noise, which makes numerical
gradients unreliable at tight tolerances; Nelder-Mead only compares function
values and is indifferent to it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DifferentiationError, SingularInformationError

# Lagarias et al. (1998) standard coefficients
_REFLECT, _EXPAND, _CONTRACT, _SHRINK = 1.0, 2.0, 0.5, 0.5


@dataclass
class OptimResult:
    argmax: np.ndarray
    max_value: float
    iterations: int
    converged: bool
    message: str
    evaluations: int = 0


def _safe(f):
    def g(x):
        try:
            v = float(f(x))
        except (ArithmeticError, ValueError):
            return -np.inf
        return v if np.isfinite(v) else -np.inf
    return g


def _nelder_mead(f, x0, step, tol, xtol, max_iter):
    n = x0.size
    simplex = np.empty((n + 1, n))
    simplex[0] = x0
    for i in range(n):
        simplex[i + 1] = x0
        simplex[i + 1, i] += step[i]
    fvals = np.array([f(x) for x in simplex])
    nfev = n + 1
    it = 0
    while it < max_iter:
        order = np.argsort(-fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        if (np.isfinite(fvals[0]) and fvals[0] - fvals[-1] < tol
                and np.max(np.abs(simplex[1:] - simplex[0])) < xtol):
            return simplex[0], fvals[0], it, nfev, True
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + _REFLECT * (centroid - worst)
        fr = f(xr)
        nfev += 1
        if fr > fvals[0]:
            xe = centroid + _EXPAND * (xr - centroid)
            fe = f(xe)
            nfev += 1
            if fe > fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr > fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr > fvals[-1]:
            xc = centroid + _CONTRACT * (xr - centroid)
            fc = f(xc)
            nfev += 1
            if fc >= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = centroid + _CONTRACT * (worst - centroid)
            fc = f(xc)
            nfev += 1
            if fc >= fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        simplex[1:] = simplex[0] + _SHRINK * (simplex[1:] - simplex[0])
        fvals[1:] = [f(x) for x in simplex[1:]]
        nfev += n
    best = int(np.argmax(fvals))
    return simplex[best], fvals[best], it, nfev, False


def maximize(f, x0, tol=1e-10, max_iter=5000, xtol=1e-8, step=None):
    """Maximise ``f`` by Nelder-Mead.

    Converged when the simplex function-value spread is below ``tol`` and
    every vertex lies within ``xtol`` of the best one (max-norm). A run that
    exhausts ``max_iter`` is restarted once from its incumbent with a fresh
    simplex; if that also fails the incumbent is returned unconverged.

    ``step`` sets the initial simplex edge per coordinate (default
    ``0.1 * max(1, |x0_i|)``).
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    g = _safe(f)
    if not np.isfinite(g(x0)):
        raise ValueError("objective is not finite at the starting point")
    if step is None:
        step = 0.1 * np.maximum(1.0, np.abs(x0))
    step = np.broadcast_to(np.asarray(step, dtype=float), x0.shape)
    total_it = total_ev = 0
    x = x0
    for attempt in range(2):
        x, fx, it, nfev, ok = _nelder_mead(g, x, step, tol, xtol, max_iter)
        total_it += it
        total_ev += nfev
        if ok:
            msg = "converged" if attempt == 0 else "converged after restart"
            return OptimResult(x.copy(), float(fx), total_it, True, msg, total_ev)
    return OptimResult(x.copy(), float(fx), total_it, False,
                       f"no convergence in {max_iter} iterations (after restart)", total_ev)


def hessian_fd(f, x, rel_step=1e-4):
    """Central-difference Hessian with steps h_i = rel_step * max(1, |x_i|)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = x.size
    h = rel_step * np.maximum(1.0, np.abs(x))

    def ev(dx):
        v = float(f(x + dx))
        if not np.isfinite(v):
            raise DifferentiationError(f"non-finite objective at {x + dx!r}")
        return v

    f0 = ev(np.zeros(n))
    H = np.empty((n, n))
    e = np.eye(n) * h
    for i in range(n):
        H[i, i] = (ev(e[i]) - 2.0 * f0 + ev(-e[i])) / (h[i] * h[i])
        for j in range(i):
            H[i, j] = (ev(e[i] + e[j]) - ev(e[i] - e[j])
                       - ev(e[j] - e[i]) + ev(-e[i] - e[j])) / (4.0 * h[i] * h[j])
            H[j, i] = H[i, j]
    return 0.5 * (H + H.T)


def cov_from_neg_hessian(H):
    """(-H)^-1 through a Cholesky factor of -H."""
    A = -np.asarray(H, dtype=float)
    A = 0.5 * (A + A.T)
    if not np.all(np.isfinite(A)):
        raise SingularInformationError("information matrix has non-finite entries")
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise SingularInformationError("negative Hessian is not positive definite") from None
    Linv = np.linalg.solve(L, np.eye(A.shape[0]))
    cov = Linv.T @ Linv
    return 0.5 * (cov + cov.T)
