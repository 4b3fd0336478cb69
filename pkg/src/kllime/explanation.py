"""End-to-end explanation of one instance and the artifact it produces."""
import json
import os
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import adapter
from .divergence import POWER_GUARD, UndefinedPowerError
from .io import power_curve_tsv
from .models import posterior_from_dict, predict
from .perturb import BINARY_PRESENCE, LocalityConfig, interpretable_rep, sample_perturbations
from .projection import SolverConfig, fit_null, power_curve, project_ensemble, select_complexity
from .render import render_map
from .rng import derive_seed

ARTIFACT_FORMAT = "kllime-explanation"
ARTIFACT_VERSION = 1


@dataclass(frozen=True)
class ExplainOptions:
    seed: int = 0
    num_perturbations: int = 1000
    num_posterior_samples: int = 100
    beta_a: float = 1.0
    beta_b: float = 1.0
    rho_fixed: Optional[float] = None
    num_lambdas: int = 50
    lambda_min_ratio: float = 1e-3
    target_power: float = 0.8
    representation: str = BINARY_PRESENCE
    full: bool = False
    n_jobs: int = 1


class BuiltinSource:
    """A built-in posterior; the sampling seed comes from the root seed."""

    def __init__(self, post, L, seed, name="builtin"):
        self.post, self.L, self.seed, self.name = post, L, seed, name

    @classmethod
    def from_file(cls, path, L, root_seed):
        with open(path) as fh:
            post = posterior_from_dict(json.load(fh))
        return cls(post, L, derive_seed(root_seed, "posterior"), f"builtin:{os.path.basename(path)}")

    def __call__(self, Z):
        return predict(self.post, Z, self.L, self.seed)

    def close(self):
        pass


class AdapterSource:
    def __init__(self, spec):
        self.session = adapter.connect(spec)
        self.name = spec.partition(":")[0]
        self.L = self.session.L

    def __call__(self, Z):
        return self.session.predict(Z)

    def close(self):
        self.session.close()


def open_source(spec, opts):
    kind, _, target = spec.partition(":")
    if kind == "builtin":
        return BuiltinSource.from_file(target, opts.num_posterior_samples, opts.seed)
    if kind in ("adapter-cmd", "adapter-tcp"):
        return AdapterSource(spec)
    raise ValueError(f"unknown model source {spec!r} (builtin:, adapter-cmd:, adapter-tcp:)")


def _flt(a):
    return np.asarray(a, dtype=np.float64).tolist()


def explain(instance, source, opts=ExplainOptions()):
    """Run the full pipeline; returns the artifact as a plain dict.

    Raises ``UndefinedPowerError`` when the model's predictions carry no
    information over the locality.
    """
    rep = interpretable_rep(instance)
    locality = LocalityConfig(opts.beta_a, opts.beta_b, opts.num_perturbations,
                              derive_seed(opts.seed, "perturb"), opts.rho_fixed)
    batch = sample_perturbations(instance, rep, locality, opts.representation)
    preds = source(batch.originals)
    if preds.N != batch.num_samples:
        raise ValueError(f"model returned {preds.N} predictions for {batch.num_samples} inputs")
    null = fit_null(batch, preds)
    if null.delta_0 < POWER_GUARD:
        raise UndefinedPowerError(
            f"null-model information loss is {null.delta_0:.3g}: the model's predictions are "
            "constant over the locality, so explanatory power is undefined")
    solver = SolverConfig(num_lambdas=opts.num_lambdas, lambda_min_ratio=opts.lambda_min_ratio)
    ens = project_ensemble(batch, preds, solver, opts.n_jobs)
    curve = power_curve(ens, null.delta_0)
    select_complexity(curve, opts.target_power)
    flags = ens.flags()
    solver_meta = asdict(solver)
    solver_meta["lambda_grid"] = "auto"
    return {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "metadata": {
            "seed": opts.seed,
            "num_perturbations": opts.num_perturbations,
            "num_posterior_samples": preds.L,
            "family": preds.family,
            "model": getattr(source, "name", "custom"),
            "beta_a": opts.beta_a,
            "beta_b": opts.beta_b,
            "rho_fixed": opts.rho_fixed,
            "representation": opts.representation,
            "lambda_grid": _flt(ens.lambda_grid),
            "solver": solver_meta,
            "flags": {k: [list(v) for v in vals] for k, vals in flags.items()},
            "alignment": ens.alignment,
        },
        "instance": {
            "d": instance.d,
            "shape": list(instance.shape) if instance.shape else None,
            "background": instance.background,
            "features": _flt(instance.features),
            "active_count": rep.active_count,
        },
        "delta_0": null.delta_0,
        "curve": {
            "lambda": _flt(curve.lambdas),
            "mean_complexity": _flt(curve.complexity),
            "relative_power": _flt(curve.power),
            "delta_s": _flt(curve.delta_s),
            "selected_index": curve.selected_index,
            "target_power": curve.target_power,
            "attained": curve.attained,
        },
        "mean_intercept": _flt([np.mean([path[k].intercept for path in ens.per_sample_paths])
                                for k in range(ens.K)]),
        "mean_coefficients": _flt(ens.mean_coefficients),
        "var_coefficients": _flt(ens.var_coefficients),
        "per_sample_coefficients": _flt(ens.coefficients) if opts.full else None,
    }


def dumps(artifact):
    return json.dumps(artifact, separators=(",", ":"), allow_nan=False) + "\n"


def save(artifact, path):
    with open(path, "w") as fh:
        fh.write(dumps(artifact))


def load(path):
    with open(path) as fh:
        art = json.load(fh)
    if art.get("format") != ARTIFACT_FORMAT:
        raise ValueError(f"{path}: not an explanation artifact")
    return art


def curve_tsv(artifact):
    c = artifact["curve"]
    return power_curve_tsv(c["lambda"], c["mean_complexity"], c["relative_power"])


def select_map(artifact, what="mean", at="selected"):
    """The coefficient or variance map requested by ``what``/``at``."""
    K = len(artifact["curve"]["lambda"])
    if at == "selected":
        k = artifact["curve"]["selected_index"]
    elif at.startswith("lambda-index:"):
        k = int(at.split(":", 1)[1])
    else:
        raise ValueError(f"bad --at value {at!r}")
    if not 0 <= k < K:
        raise IndexError(f"lambda index {k} out of range 0..{K - 1}")
    if what == "mean":
        return np.array(artifact["mean_coefficients"][k]), "mean"
    if what == "variance":
        return np.array(artifact["var_coefficients"][k]), "variance"
    if what.startswith("sample:"):
        per = artifact.get("per_sample_coefficients")
        if per is None:
            raise ValueError("artifact holds no per-sample maps (re-run explain with --full)")
        l = int(what.split(":", 1)[1])
        if not 0 <= l < len(per):
            raise IndexError(f"sample index {l} out of range 0..{len(per) - 1}")
        return np.array(per[l][k]), "mean"
    raise ValueError(f"bad --what value {what!r}")


def render(artifact, what="mean", at="selected"):
    shape = artifact["instance"].get("shape")
    if not shape:
        raise ValueError("artifact has no image shape; rendering needs a PGM instance or --shape")
    values, kind = select_map(artifact, what, at)
    return render_map(values, tuple(shape), kind)
