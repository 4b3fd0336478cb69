"""KL projection of predictive distributions onto sparse GLM explanations.

For one posterior sample the explanation minimizes

    sum_i w_i KL(p(y | z_i, theta) || p(y | z'_i, phi)) + lam * ||beta||_1

over the intercept (unpenalized) and coefficients ``beta`` on the
explanation features.

Gaussian family. With explanation ``N(b0 + z'.beta, s2)`` the objective is
``0.5 * sum_i w_i [log(s2 / v_i) + (v_i + (m_i - eta_i)^2) / s2 - 1]``.
For fixed mean parameters it is minimized by
``s2 = sum_i w_i v_i + sum_i w_i (m_i - eta_i)^2``, and substituting back
leaves ``0.5 * log(s2) + const``, which is increasing in the weighted
residual sum of squares. The mean fit therefore decouples into a weighted
lasso on the target means; ``lam`` is expressed on the scale of
``0.5 * sum_i w_i (m_i - eta_i)^2``.

Bernoulli family. The objective is a weighted cross-entropy with soft
targets ``p_i`` (plus a constant), minimized by IRLS: each outer step solves
the weighted lasso of the quadratic expansion, followed by a backtracking
step on the exact objective.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .divergence import (BERNOULLI, GAUSSIAN, PredictionMatrix, clamp_prob,
                         kl_bernoulli, kl_gaussian, relative_power)
from .kernels import cd_lasso

ETA_CLAMP = 30.0
COEF_CAP = 1e3


@dataclass(frozen=True)
class SolverConfig:
    lambda_grid: Optional[Sequence[float]] = None
    num_lambdas: int = 50
    lambda_min_ratio: float = 1e-3
    max_iters: int = 10_000
    tol: float = 1e-7
    irls_damping: float = 1.0
    max_irls: int = 100

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.irls_damping <= 1:
            raise ValueError("irls_damping must lie in (0, 1]")
        if self.lambda_grid is not None:
            g = np.asarray(self.lambda_grid, dtype=np.float64)
            if g.ndim != 1 or g.size < 1 or np.any(g <= 0) or np.any(np.diff(g) >= 0):
                raise ValueError("lambda_grid must be strictly decreasing positive values")
            object.__setattr__(self, "lambda_grid", tuple(float(x) for x in g))
        elif self.num_lambdas < 1 or not 0 < self.lambda_min_ratio <= 1:
            raise ValueError("need num_lambdas >= 1 and lambda_min_ratio in (0, 1]")

    def grid(self, lam_max):
        if self.lambda_grid is not None:
            return np.array(self.lambda_grid)
        if lam_max <= 0:
            # nothing to explain: every fit is the intercept-only model
            return np.zeros(self.num_lambdas)
        if self.num_lambdas == 1:
            return np.array([lam_max])
        return lam_max * self.lambda_min_ratio ** (np.arange(self.num_lambdas) / (self.num_lambdas - 1))


@dataclass
class ExplanationModel:
    family: str
    intercept: float
    coefficients: Dict[int, float]
    lam: float
    kl_loss: float
    noise_var: Optional[float] = None
    converged: bool = True
    saturated: bool = False
    iterations: int = 0

    @property
    def nnz(self):
        return len(self.coefficients)

    def dense(self, d):
        out = np.zeros(d)
        for j, v in self.coefficients.items():
            out[j] = v
        return out


def sigmoid(eta):
    return np.exp(-np.logaddexp(0.0, -eta))


def logit(p):
    return float(np.log(p) - np.log1p(-p))


def _targets(family, targets):
    if family == BERNOULLI:
        return clamp_prob(np.asarray(targets, dtype=np.float64)), None
    mu, sigma2 = targets
    return np.asarray(mu, dtype=np.float64), np.asarray(sigma2, dtype=np.float64)


def lambda_max(batch, targets, family):
    """Smallest penalty at which the all-zero coefficient vector is optimal."""
    t, _ = _targets(family, targets)
    w = batch.weights
    Z = batch.design()
    if Z.shape[1] == 0:
        return 0.0
    tbar = float(np.dot(w, t))
    lam = float(np.max(np.abs(Z.T @ (w * (t - tbar)))))
    # constant targets leave only rounding residue in t - tbar
    if lam <= 1e-13 * float(np.max(np.abs(t))) * float(np.max(np.abs(Z), initial=0.0)):
        return 0.0
    return lam


def _coef_map(features, beta):
    nz = np.flatnonzero(beta)
    return {int(features[j]): float(beta[j]) for j in nz}


def _weighted_kl(kl_row, w):
    return float(np.dot(kl_row, w))


def _gaussian_model(batch, mu, sigma2, lam, b0, beta, converged, sweeps):
    w = batch.weights
    eta = b0 + batch.design() @ beta if beta.size else np.full(mu.shape, b0)
    resid = mu - eta
    noise_var = float(np.dot(w, sigma2) + np.dot(w, resid * resid))
    kl = _weighted_kl(kl_gaussian(mu, sigma2, eta, noise_var), w)
    return ExplanationModel(GAUSSIAN, float(b0), _coef_map(batch.features, beta), float(lam),
                            kl, noise_var=noise_var, converged=converged, iterations=sweeps)


def _bernoulli_model(batch, p, lam, b0, beta, converged, saturated, iters):
    eta = b0 + batch.design() @ beta if beta.size else np.full(p.shape, b0)
    kl = _weighted_kl(kl_bernoulli(p, sigmoid(eta)), batch.weights)
    return ExplanationModel(BERNOULLI, float(b0), _coef_map(batch.features, beta), float(lam),
                            kl, converged=converged, saturated=saturated, iterations=iters)


def intercept_only(batch, targets, family):
    """The null model: intercept-only KL projection (closed form)."""
    t, sigma2 = _targets(family, targets)
    w = batch.weights
    beta = np.zeros(len(batch.features))
    if family == GAUSSIAN:
        return _gaussian_model(batch, t, sigma2, np.inf, float(np.dot(w, t)), beta, True, 0)
    return _bernoulli_model(batch, t, np.inf, logit(float(np.dot(w, t))), beta, True, False, 0)


def _warm(warm, p):
    if warm is None:
        return None, np.zeros(p)
    b0, beta = warm
    return b0, np.array(beta, dtype=np.float64)


def project_gaussian(batch, mu, sigma2, lam, config=None, warm=None, lam_max=None):
    config = config or SolverConfig()
    mu = np.asarray(mu, dtype=np.float64)
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    if not np.all(np.isfinite(mu)) or not np.all(np.isfinite(sigma2)):
        raise ValueError("targets must be finite")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if lam_max is None:
        lam_max = lambda_max(batch, (mu, sigma2), GAUSSIAN)
    if lam >= lam_max:
        m = intercept_only(batch, (mu, sigma2), GAUSSIAN)
        m.lam = float(lam)
        return m
    w = batch.weights
    b0, beta = _warm(warm, len(batch.features))
    if b0 is None:
        b0 = float(np.dot(w, mu))
    b0, beta, sweeps, conv = cd_lasso(batch.design(), mu, w, lam, b0, beta,
                                      config.max_iters, config.tol)
    return _gaussian_model(batch, mu, sigma2, lam, b0, beta, conv, sweeps)


def bernoulli_objective(Z, p, w, lam, b0, beta):
    """Weighted KL(p || sigmoid(b0 + Z beta)) plus the L1 penalty, smooth in eta."""
    eta = b0 + Z @ beta
    # -log q = softplus(-eta), -log(1-q) = softplus(eta)
    ce = p * np.logaddexp(0.0, -eta) + (1 - p) * np.logaddexp(0.0, eta)
    ent = p * np.log(p) + (1 - p) * np.log1p(-p)
    return float(np.dot(w, ce + ent)) + lam * float(np.abs(beta).sum())


def bernoulli_gradient(Z, p, w, b0, beta):
    """Gradient of the smooth part w.r.t. ``(b0, beta)``."""
    r = w * (sigmoid(b0 + Z @ beta) - p)
    return np.concatenate(([r.sum()], Z.T @ r))


def project_bernoulli(batch, p, lam, config=None, warm=None, lam_max=None):
    config = config or SolverConfig()
    p = np.asarray(p, dtype=np.float64)
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ValueError("targets must be probabilities")
    p = clamp_prob(p)
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if lam_max is None:
        lam_max = lambda_max(batch, p, BERNOULLI)
    if lam >= lam_max:
        m = intercept_only(batch, p, BERNOULLI)
        m.lam = float(lam)
        return m
    Z = batch.design()
    w = batch.weights
    b0, beta = _warm(warm, Z.shape[1])
    if b0 is None:
        b0 = logit(float(np.dot(w, p)))
    obj = bernoulli_objective(Z, p, w, lam, b0, beta)
    converged = False
    it = 0
    for it in range(1, config.max_irls + 1):
        eta = np.clip(b0 + Z @ beta, -ETA_CLAMP, ETA_CLAMP)
        q = sigmoid(eta)
        v = q * (1.0 - q)
        y = eta + (p - q) / v
        nb0, nbeta, _, inner_ok = cd_lasso(Z, y, w * v, lam, b0, beta,
                                           config.max_iters, config.tol)
        t = config.irls_damping
        while True:
            cb0 = b0 + t * (nb0 - b0)
            cbeta = beta + t * (nbeta - beta)
            cobj = bernoulli_objective(Z, p, w, lam, cb0, cbeta)
            if cobj <= obj:
                break
            t *= 0.5
            if t < 1e-10:
                cb0, cbeta, cobj = b0, beta, obj
                break
        change = max(abs(cb0 - b0), float(np.max(np.abs(cbeta - beta), initial=0.0)))
        b0, beta, obj = cb0, cbeta, cobj
        if change < config.tol and inner_ok:
            converged = True
            break
    saturated = bool(abs(b0) > COEF_CAP or np.any(np.abs(beta) > COEF_CAP))
    if saturated:
        b0 = float(np.clip(b0, -COEF_CAP, COEF_CAP))
        beta = np.clip(beta, -COEF_CAP, COEF_CAP)
    return _bernoulli_model(batch, p, lam, b0, beta, converged, saturated, it)


def _project(family, batch, targets, lam, config, warm, lam_max):
    if family == GAUSSIAN:
        mu, sigma2 = targets
        return project_gaussian(batch, mu, sigma2, lam, config, warm, lam_max)
    return project_bernoulli(batch, targets, lam, config, warm, lam_max)


def fit_path(batch, targets, config=None, family=BERNOULLI, grid=None):
    """Fit along a decreasing penalty grid with warm starts."""
    config = config or SolverConfig()
    lam_max = lambda_max(batch, targets, family)
    grid = config.grid(lam_max) if grid is None else np.asarray(grid, dtype=np.float64)
    models = []
    warm = None
    for lam in grid:
        m = _project(family, batch, targets, float(lam), config, warm, lam_max)
        models.append(m)
        f = batch.features
        warm = (m.intercept, m.dense(batch.reps.shape[1])[f])
    return models


@dataclass
class ProjectionEnsemble:
    per_sample_paths: List[List[ExplanationModel]]
    lambda_grid: np.ndarray
    coefficients: np.ndarray  # L x K x d
    mean_coefficients: np.ndarray
    var_coefficients: np.ndarray
    mean_complexity: np.ndarray
    kl_losses: np.ndarray  # L x K
    family: str
    alignment: str = "shared lambda grid index (grid from pooled lambda_max over posterior samples)"

    @property
    def L(self):
        return len(self.per_sample_paths)

    @property
    def K(self):
        return len(self.lambda_grid)

    def flags(self):
        unconverged = [(l, k) for l, path in enumerate(self.per_sample_paths)
                       for k, m in enumerate(path) if not m.converged]
        saturated = [(l, k) for l, path in enumerate(self.per_sample_paths)
                     for k, m in enumerate(path) if m.saturated]
        return {"unconverged": unconverged, "saturated": saturated}


def project_ensemble(batch, preds, config=None, n_jobs=1):
    """Project every posterior sample along one shared penalty grid."""
    config = config or SolverConfig()
    if preds.N != batch.num_samples:
        raise ValueError(f"predictions cover {preds.N} points, batch has {batch.num_samples}")
    pooled = max(lambda_max(batch, preds.targets(l), preds.family) for l in range(preds.L))
    grid = config.grid(pooled)

    def run(l):
        return fit_path(batch, preds.targets(l), config, preds.family, grid)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            paths = list(ex.map(run, range(preds.L)))
    else:
        paths = [run(l) for l in range(preds.L)]
    d = batch.reps.shape[1]
    coefs = np.array([[m.dense(d) for m in path] for path in paths])
    kl = np.array([[m.kl_loss for m in path] for path in paths])
    nnz = np.array([[m.nnz for m in path] for path in paths], dtype=np.float64)
    return ProjectionEnsemble(
        per_sample_paths=paths,
        lambda_grid=grid,
        coefficients=coefs,
        mean_coefficients=coefs.mean(axis=0),
        var_coefficients=coefs.var(axis=0),
        mean_complexity=nnz.mean(axis=0),
        kl_losses=kl,
        family=preds.family,
    )


@dataclass
class NullFit:
    models: List[ExplanationModel]
    delta_0: float


def fit_null(batch, preds):
    models = [intercept_only(batch, preds.targets(l), preds.family) for l in range(preds.L)]
    return NullFit(models, float(np.mean(np.array([m.kl_loss for m in models]))))


@dataclass
class PowerCurve:
    lambdas: np.ndarray
    complexity: np.ndarray
    power: np.ndarray
    delta_s: np.ndarray
    delta_0: float
    selected_index: Optional[int] = None
    target_power: Optional[float] = None
    attained: Optional[bool] = None

    @property
    def points(self):
        return list(zip(self.lambdas.tolist(), self.complexity.tolist(), self.power.tolist()))


def power_curve(ensemble, delta_0):
    # same 1-D reduction as fit_null, so a null-equivalent column gives exactly 0
    delta_s = np.array([np.mean(col) for col in ensemble.kl_losses.T])
    power = np.array([relative_power(ds, delta_0) for ds in delta_s])
    return PowerCurve(np.array(ensemble.lambda_grid), ensemble.mean_complexity.copy(),
                      power, delta_s, float(delta_0))


def select_complexity(curve, target_power):
    """Sparsest grid point reaching ``target_power``.

    Returns ``(index, attained)``; when no point qualifies, the index of the
    highest power is returned with ``attained=False``. ``curve`` is updated
    with the selection.
    """
    if target_power > 1:
        raise ValueError("target power cannot exceed 1")
    power = np.asarray(curve.power)
    ok = np.flatnonzero(power >= target_power)
    if ok.size:
        cx = np.asarray(curve.complexity)[ok]
        # first minimum = largest lambda among ties, grid is decreasing
        idx, attained = int(ok[np.argmin(cx)]), True
    else:
        idx, attained = int(np.argmax(power)), False
    curve.selected_index, curve.target_power, curve.attained = idx, float(target_power), attained
    return idx, attained
