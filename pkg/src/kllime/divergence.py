"""KL divergences between predictive distributions, information loss and
relative explanatory power. All quantities are in nats."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

EPS_P = 1e-12
MIN_VAR = 1e-12
POWER_GUARD = 1e-15

BERNOULLI = "bernoulli"
GAUSSIAN = "gaussian"
FAMILIES = (BERNOULLI, GAUSSIAN)


class DomainError(ValueError):
    pass


class UndefinedPowerError(ArithmeticError):
    """The full model carries no information beyond the null model."""


def clamp_prob(p):
    return np.clip(p, EPS_P, 1.0 - EPS_P)


def kl_bernoulli(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if np.any((p < 0) | (p > 1) | (q < 0) | (q > 1)) or np.any(np.isnan(p) | np.isnan(q)):
        raise DomainError("bernoulli parameters must lie in [0, 1]")
    p = clamp_prob(p)
    q = clamp_prob(q)
    out = p * (np.log(p) - np.log(q)) + (1.0 - p) * (np.log1p(-p) - np.log1p(-q))
    # rounding can leave tiny negatives when p ~ q
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def kl_gaussian(mu1, sigma2_1, mu2, sigma2_2):
    mu1, s1, mu2, s2 = (np.asarray(a, dtype=np.float64) for a in (mu1, sigma2_1, mu2, sigma2_2))
    if np.any(~(s1 > 0)) or np.any(~(s2 > 0)):
        raise DomainError("variances must be positive")
    s1 = np.maximum(s1, MIN_VAR)
    s2 = np.maximum(s2, MIN_VAR)
    ratio = s1 / s2
    out = 0.5 * (ratio - 1.0 - np.log(ratio) + (mu1 - mu2) ** 2 / s2)
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PredictionMatrix:
    """L x N predictive parameters: ``p`` for bernoulli, ``mu``/``sigma2``
    for gaussian. Rows are posterior samples, columns locality points."""

    family: str
    p: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = None
    sigma2: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.family == BERNOULLI:
            if self.p is None:
                raise ValueError("bernoulli predictions need p")
            p = np.atleast_2d(np.asarray(self.p, dtype=np.float64))
            if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
                raise DomainError("probabilities must lie in [0, 1]")
            object.__setattr__(self, "p", clamp_prob(p))
            shape = p.shape
        elif self.family == GAUSSIAN:
            if self.mu is None or self.sigma2 is None:
                raise ValueError("gaussian predictions need mu and sigma2")
            mu = np.atleast_2d(np.asarray(self.mu, dtype=np.float64))
            s2 = np.atleast_2d(np.asarray(self.sigma2, dtype=np.float64))
            if mu.shape != s2.shape:
                raise ValueError("mu and sigma2 shapes differ")
            if np.any(~np.isfinite(mu)) or np.any(~np.isfinite(s2)) or np.any(s2 <= 0):
                raise DomainError("gaussian parameters must be finite with positive variance")
            object.__setattr__(self, "mu", mu)
            object.__setattr__(self, "sigma2", np.maximum(s2, MIN_VAR))
            shape = mu.shape
        else:
            raise ValueError(f"unknown family {self.family!r}")
        if shape[0] < 1 or shape[1] < 1:
            raise ValueError("need L >= 1 and N >= 1")
        for name in ("p", "mu", "sigma2"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)

    @property
    def shape(self):
        return (self.p if self.family == BERNOULLI else self.mu).shape

    @property
    def L(self):
        return self.shape[0]

    @property
    def N(self):
        return self.shape[1]

    def row(self, l):
        if self.family == BERNOULLI:
            return PredictionMatrix(BERNOULLI, p=self.p[l:l + 1])
        return PredictionMatrix(GAUSSIAN, mu=self.mu[l:l + 1], sigma2=self.sigma2[l:l + 1])

    def targets(self, l):
        """Projection targets for posterior sample ``l``."""
        if self.family == BERNOULLI:
            return self.p[l]
        return self.mu[l], self.sigma2[l]


def pointwise_kl(full, expl):
    """L x N matrix of KL(full[l][i] || expl[l][i])."""
    if full.family != expl.family:
        raise ValueError(f"family mismatch: {full.family} vs {expl.family}")
    if full.shape != expl.shape:
        raise ValueError(f"shape mismatch: {full.shape} vs {expl.shape}")
    if full.family == BERNOULLI:
        return kl_bernoulli(full.p, expl.p)
    return kl_gaussian(full.mu, full.sigma2, expl.mu, expl.sigma2)


def information_loss(full, expl, weights):
    kl = np.atleast_2d(pointwise_kl(full, expl))
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (full.N,):
        raise ValueError(f"weights length {w.shape} does not match N={full.N}")
    # row-wise dots, same reduction order as per-sample projection losses
    return float(np.mean([np.dot(row, w) for row in kl]))


def relative_power(delta_s, delta_0):
    if not delta_0 >= POWER_GUARD:
        raise UndefinedPowerError(
            f"null-model information loss {delta_0:.3g} is ~0: the explained model's "
            "predictions do not vary over the locality, so explanatory power is undefined")
    return 1.0 - delta_s / delta_0
