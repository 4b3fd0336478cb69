"""Weighted lasso inner solver.

Solves::

    min_{b0, beta}  0.5 * sum_i h_i (y_i - b0 - z_i . beta)^2 + lam * ||beta||_1

by cyclic coordinate descent with soft-thresholding, in covariance-update
form: with ``X = [1, Z]`` the solver works on ``G = X' H X`` and
``c = X' H y`` only, so a sweep costs O(p^2) whatever N is. Coordinate 0 is
the unpenalized intercept. After a full sweep the solver cycles over the
nonzero coordinates only, and declares convergence when a full sweep moves
no coordinate by ``tol`` or more.

``cd_gram`` is the backend selected by ``KLLIME_DISABLE_NUMBA``; both
``cd_gram_numba`` and ``cd_gram_numpy`` stay importable for benchmarking.
"""
import numpy as np

from . import _accel


def _cd_gram_impl(G, c, lam, theta, max_sweeps, tol):
    # theta is updated in place; q tracks G @ theta
    m = theta.shape[0]
    q = np.dot(G, theta)
    sweeps = 0
    converged = False
    full = True
    while sweeps < max_sweeps:
        sweeps += 1
        maxd = 0.0
        for j in range(m):
            tj = theta[j]
            gjj = G[j, j]
            if (j > 0 and not full and tj == 0.0) or gjj <= 0.0:
                continue
            g = c[j] - q[j] + gjj * tj
            if j == 0:
                new = g / gjj
            elif g > lam:
                new = (g - lam) / gjj
            elif g < -lam:
                new = (g + lam) / gjj
            else:
                new = 0.0
            delta = new - tj
            if delta != 0.0:
                q += delta * G[j]
                theta[j] = new
                if abs(delta) > maxd:
                    maxd = abs(delta)
        if maxd < tol:
            if full:
                converged = True
                break
            full = True
        else:
            full = False
    return sweeps, converged


cd_gram_numpy = _cd_gram_impl
cd_gram_numba = _accel.jit(_cd_gram_impl)
cd_gram = cd_gram_numba if _accel.USE_NUMBA else cd_gram_numpy


def gram(Z, y, h):
    """``G = X' H X`` and ``c = X' H y`` for ``X = [1, Z]``."""
    n, p = Z.shape
    X = np.empty((n, p + 1))
    X[:, 0] = 1.0
    X[:, 1:] = Z
    hX = X * h[:, None]
    return np.ascontiguousarray(hX.T @ X), hX.T @ y


def gram_objective(G, c, lam, theta):
    """Lasso objective up to the constant ``0.5 * sum h y^2``."""
    return 0.5 * float(theta @ G @ theta) - float(c @ theta) + lam * float(np.abs(theta[1:]).sum())


def polish(G, c, lam, theta, rounds=3):
    """Exact re-solve on the current support with signs held fixed.

    Coordinates whose sign flips are dropped from the support and the solve
    repeated. Returns the refined vector if it does not raise the objective,
    otherwise ``theta`` unchanged.
    """
    support = np.union1d([0], np.flatnonzero(theta))
    signs = np.sign(theta)
    signs[0] = 0.0
    cand = None
    for _ in range(rounds):
        try:
            sol = np.linalg.solve(G[np.ix_(support, support)], c[support] - lam * signs[support])
        except np.linalg.LinAlgError:
            return theta
        if not np.all(np.isfinite(sol)):
            return theta
        flipped = (np.sign(sol) != signs[support]) & (signs[support] != 0)
        if lam == 0.0 or not flipped.any():
            cand = np.zeros_like(theta)
            cand[support] = sol
            break
        support = support[~flipped]
    if cand is None or gram_objective(G, c, lam, cand) > gram_objective(G, c, lam, theta):
        return theta
    return cand


def cd_lasso(Z, y, h, lam, b0=0.0, beta=None, max_sweeps=10_000, tol=1e-7, refine=True):
    """Solve the weighted lasso; returns ``(b0, beta, sweeps, converged)``."""
    Z = np.asarray(Z, dtype=np.float64)
    G, c = gram(Z, np.asarray(y, dtype=np.float64), np.asarray(h, dtype=np.float64))
    theta = np.zeros(Z.shape[1] + 1)
    theta[0] = b0
    if beta is not None:
        theta[1:] = beta
    sweeps, converged = cd_gram(G, c, float(lam), theta, int(max_sweeps), float(tol))
    if refine:
        theta = polish(G, c, lam, theta)
    return float(theta[0]), theta[1:].copy(), int(sweeps), bool(converged)


def lasso_objective(Z, y, h, lam, b0, beta):
    r = y - b0 - Z @ beta
    return 0.5 * float(np.dot(h, r * r)) + lam * float(np.abs(beta).sum())
