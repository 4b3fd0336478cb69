"""Interpretable representation and locality sampling around an instance.

The locality of an instance ``x`` is sampled by background masking: for
each sample a zeroing probability ``rho ~ Beta(a, b)`` is drawn, then every
position is independently replaced by the background value with probability
``rho``. The interpretable representation of a point records which of the
instance's foreground positions survived.
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .rng import generator

BINARY_PRESENCE = "binary-presence"
IDENTITY = "identity"
REPRESENTATIONS = (BINARY_PRESENCE, IDENTITY)


def _frozen(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Instance:
    features: np.ndarray
    background: float = 0.0
    shape: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64).ravel()
        if x.size < 1:
            raise ValueError("instance needs at least one feature")
        if not np.all(np.isfinite(x)):
            raise ValueError("instance features must be finite")
        if not np.isfinite(self.background):
            raise ValueError("background must be finite")
        if self.shape is not None:
            rows, cols = (int(s) for s in self.shape)
            if rows * cols != x.size:
                raise ValueError(f"shape {rows}x{cols} does not match d={x.size}")
            object.__setattr__(self, "shape", (rows, cols))
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "background", float(self.background))

    @property
    def d(self):
        return self.features.size


@dataclass(frozen=True)
class InterpretableRep:
    active: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "active", _frozen(np.asarray(self.active, dtype=np.uint8)))

    @property
    def active_count(self):
        return int(self.active.sum())

    @property
    def positions(self):
        return np.flatnonzero(self.active)


@dataclass(frozen=True)
class LocalityConfig:
    beta_a: float = 1.0
    beta_b: float = 1.0
    num_samples: int = 1000
    seed: int = 0
    rho_fixed: Optional[float] = None

    def __post_init__(self):
        if not (self.beta_a > 0 and self.beta_b > 0):
            raise ValueError("beta parameters must be positive")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.rho_fixed is not None and not 0.0 <= self.rho_fixed <= 1.0:
            raise ValueError("rho_fixed must lie in [0, 1]")


@dataclass(frozen=True)
class PerturbationBatch:
    """``N`` locality samples in original and interpretable space.

    ``features`` lists the positions that act as explanation covariates;
    ``reps[:, features]`` is the explanation design matrix.
    """

    originals: np.ndarray
    reps: np.ndarray
    weights: np.ndarray
    features: np.ndarray
    representation: str = BINARY_PRESENCE
    masks: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        n = self.originals.shape[0]
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (n,) or np.any(w < 0):
            raise ValueError("weights must be a non-negative N-vector")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        for name in ("originals", "reps", "weights", "features", "masks"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, _frozen(val))

    @property
    def num_samples(self):
        return self.originals.shape[0]

    def design(self):
        """Explanation design matrix, N x len(features), float64."""
        return np.ascontiguousarray(self.reps[:, self.features], dtype=np.float64)

    def with_weights(self, weights):
        w = np.asarray(weights, dtype=np.float64)
        return PerturbationBatch(self.originals, self.reps, w / w.sum(),
                                 self.features, self.representation, self.masks)


def interpretable_rep(instance):
    """Presence bits: 1 exactly where the feature differs from background."""
    return InterpretableRep((instance.features != instance.background).astype(np.uint8))


def _masks(d, config):
    n = config.num_samples
    masks = np.empty((n, d), dtype=bool)
    for i in range(n):
        # one substream per row so the batch does not depend on loop order
        g = generator(config.seed, "perturb-row", i)
        rho = config.rho_fixed if config.rho_fixed is not None else g.beta(config.beta_a, config.beta_b)
        masks[i] = g.random(d) < rho
    return masks


def sample_perturbations(instance, rep, config, representation=BINARY_PRESENCE, weights=None):
    if representation not in REPRESENTATIONS:
        raise ValueError(f"unknown representation {representation!r}")
    d = instance.d
    masks = _masks(d, config)
    originals = np.where(masks, instance.background, instance.features[None, :])
    if representation == BINARY_PRESENCE:
        reps = (rep.active[None, :].astype(bool) & ~masks).astype(np.uint8)
        features = rep.positions
    else:
        reps = originals.copy()
        features = np.arange(d)
    n = config.num_samples
    if weights is None:
        weights = np.full(n, 1.0 / n)
    else:
        weights = np.asarray(weights, dtype=np.float64)
        weights = weights / weights.sum()
    return PerturbationBatch(originals, reps, weights, features, representation, masks)


def reconstruct(instance, reps_row):
    """Original-space point implied by a binary representation row."""
    keep = np.asarray(reps_row).astype(bool)
    return np.where(keep, instance.features, instance.background)
