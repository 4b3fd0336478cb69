"""Built-in Bayesian predictive models used as explanation targets.

``BayesLinearPosterior`` is the exact conjugate normal-inverse-gamma
posterior of a linear-Gaussian model; ``BayesLogisticPosterior`` is a
Laplace approximation around the MAP of a Gaussian-prior logistic model.
Both draw posterior samples from an explicit seed and emit a
``PredictionMatrix``.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .divergence import BERNOULLI, GAUSSIAN, MIN_VAR, PredictionMatrix, clamp_prob
from .projection import sigmoid
from .rng import generator


class NewtonError(RuntimeError):
    pass


def _psd_sqrt(cov):
    """Factor ``A`` with ``A @ A.T == cov`` for a symmetric PSD matrix."""
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass(frozen=True)
class BayesLinearPosterior:
    """Posterior ``beta | s2 ~ N(mean, s2 * cov)``, ``s2 ~ InvGamma(a_n, b_n)``.

    ``cov`` is the inverse posterior precision (per unit noise variance).
    ``noise_var`` pins the noise variance instead of sampling it.
    """

    mean: np.ndarray
    cov: np.ndarray
    a_n: float
    b_n: float
    alpha: float = 1.0
    num_train: int = 0
    noise_var: Optional[float] = None

    @classmethod
    def point(cls, mean, noise_var):
        """Degenerate posterior concentrated on ``mean`` with fixed noise."""
        mean = np.asarray(mean, dtype=np.float64)
        return cls(mean, np.zeros((mean.size, mean.size)), 1.0, 1.0, noise_var=float(noise_var))

    def to_dict(self):
        return {"kind": "bayes_linear", "mean": self.mean.tolist(), "cov": self.cov.tolist(),
                "a_n": self.a_n, "b_n": self.b_n, "alpha": self.alpha,
                "num_train": self.num_train, "noise_var": self.noise_var}

    @classmethod
    def from_dict(cls, obj):
        return cls(np.array(obj["mean"], dtype=np.float64), np.array(obj["cov"], dtype=np.float64),
                   float(obj["a_n"]), float(obj["b_n"]), float(obj.get("alpha", 1.0)),
                   int(obj.get("num_train", 0)), obj.get("noise_var"))


def fit_bayes_linear(X, y, alpha=1.0, a0=1.0, b0=1.0):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] < 1 or X.shape[0] != y.size:
        raise ValueError("need N0 >= 1 rows matching y")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    precision = X.T @ X + alpha * np.eye(X.shape[1])
    chol = np.linalg.cholesky(precision)
    mean = np.linalg.solve(chol.T, np.linalg.solve(chol, X.T @ y))
    cov = np.linalg.inv(precision)
    cov = 0.5 * (cov + cov.T)
    a_n = a0 + 0.5 * y.size
    b_n = b0 + 0.5 * float(y @ y - mean @ precision @ mean)
    return BayesLinearPosterior(mean, cov, a_n, max(b_n, 1e-300), float(alpha), y.size)


def sample_bayes_linear(post, L, seed):
    """``L`` joint draws of ``(beta, s2)``."""
    g = generator(seed, "bayes-linear")
    if post.noise_var is not None:
        s2 = np.full(L, post.noise_var)
    else:
        s2 = post.b_n / g.gamma(post.a_n, 1.0, size=L)
    eps = g.standard_normal((L, post.mean.size))
    thetas = post.mean + np.sqrt(s2)[:, None] * (eps @ _psd_sqrt(post.cov).T)
    return thetas, s2


def predict_bayes_linear(post, Z, L, seed):
    if L < 1:
        raise ValueError("L must be >= 1")
    Z = np.atleast_2d(np.asarray(Z, dtype=np.float64))
    thetas, s2 = sample_bayes_linear(post, L, seed)
    mu = thetas @ Z.T
    sigma2 = np.maximum(np.repeat(s2[:, None], Z.shape[0], axis=1), MIN_VAR)
    return PredictionMatrix(GAUSSIAN, mu=mu, sigma2=sigma2)


@dataclass(frozen=True)
class BayesLogisticPosterior:
    """Laplace posterior ``N(map, cov)`` over ``[intercept, weights]``."""

    map: np.ndarray
    cov: np.ndarray
    alpha: float = 1.0
    grad_norm: float = 0.0
    iterations: int = 0

    @property
    def intercept(self):
        return float(self.map[0])

    @property
    def weights(self):
        return self.map[1:]

    def to_dict(self):
        return {"kind": "bayes_logistic", "map": self.map.tolist(), "cov": self.cov.tolist(),
                "alpha": self.alpha}

    @classmethod
    def from_dict(cls, obj):
        return cls(np.array(obj["map"], dtype=np.float64), np.array(obj["cov"], dtype=np.float64),
                   float(obj.get("alpha", 1.0)))


def _augment(X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.hstack([np.ones((X.shape[0], 1)), X])


def logistic_log_posterior(theta, Xa, y, alpha):
    eta = Xa @ theta
    ll = float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    return ll - 0.5 * alpha * float(theta @ theta)


def logistic_gradient(theta, Xa, y, alpha):
    return Xa.T @ (y - sigmoid(Xa @ theta)) - alpha * theta


def fit_bayes_logistic(X, y, alpha=1.0, tol=1e-10, max_iter=100):
    """Newton ascent on the log posterior (intercept included and penalized)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    Xa = _augment(X)
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    theta = np.zeros(Xa.shape[1])
    eye = alpha * np.eye(Xa.shape[1])
    obj = logistic_log_posterior(theta, Xa, y, alpha)
    for it in range(1, max_iter + 1):
        grad = logistic_gradient(theta, Xa, y, alpha)
        if np.linalg.norm(grad) <= tol:
            break
        q = sigmoid(Xa @ theta)
        H = Xa.T @ ((q * (1 - q))[:, None] * Xa) + eye
        step = np.linalg.solve(H, grad)
        t = 1.0
        while t > 1e-12:
            cand = theta + t * step
            cobj = logistic_log_posterior(cand, Xa, y, alpha)
            if cobj >= obj:
                break
            t *= 0.5
        theta, obj = cand, cobj
    else:
        grad = logistic_gradient(theta, Xa, y, alpha)
        if np.linalg.norm(grad) > tol:
            raise NewtonError(f"Newton did not converge: gradient norm {np.linalg.norm(grad):.3g}")
    q = sigmoid(Xa @ theta)
    H = Xa.T @ ((q * (1 - q))[:, None] * Xa) + eye
    cov = np.linalg.inv(H)
    cov = 0.5 * (cov + cov.T)
    return BayesLogisticPosterior(theta, cov, float(alpha),
                                  float(np.linalg.norm(logistic_gradient(theta, Xa, y, alpha))), it)


def sample_bayes_logistic(post, L, seed):
    g = generator(seed, "bayes-logistic")
    eps = g.standard_normal((L, post.map.size))
    return post.map + eps @ _psd_sqrt(post.cov).T


def predict_bayes_logistic(post, Z, L, seed):
    if L < 1:
        raise ValueError("L must be >= 1")
    thetas = sample_bayes_logistic(post, L, seed)
    p = sigmoid(thetas @ _augment(Z).T)
    return PredictionMatrix(BERNOULLI, p=clamp_prob(p))


def predict(post, Z, L, seed):
    if isinstance(post, BayesLogisticPosterior):
        return predict_bayes_logistic(post, Z, L, seed)
    return predict_bayes_linear(post, Z, L, seed)


def posterior_from_dict(obj):
    kind = obj.get("kind")
    if kind == "bayes_linear":
        return BayesLinearPosterior.from_dict(obj)
    if kind == "bayes_logistic":
        return BayesLogisticPosterior.from_dict(obj)
    raise ValueError(f"unknown model kind {kind!r}")
