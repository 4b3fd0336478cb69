"""Synthetic two-class 8x8 "digit" demo.

Images are drawn from one of two ink templates (a 3 and an 8). Every pixel
is flipped between ink and background with probability ``flip``; ink pixels
get an intensity uniform in [0.5, 1], background is exactly 0. A Laplace
Bayesian logistic model is trained on pixel intensities, and one correctly
and one incorrectly classified test image are explained.
"""
import json
import os

import numpy as np

from .explanation import BuiltinSource, ExplainOptions, curve_tsv, dumps, explain, render
from .io import pgm_bytes
from .models import fit_bayes_logistic
from .perturb import Instance
from .projection import sigmoid
from .render import intensity_pixels
from .rng import derive_seed, generator

SHAPE = (8, 8)

_THREE = """
.#####..
......#.
......#.
..####..
......#.
......#.
.#####..
........
"""

_EIGHT = """
..####..
.#....#.
.#....#.
..####..
.#....#.
.#....#.
..####..
........
"""

TEMPLATES = np.array([[c == "#" for c in "".join(t.split())] for t in (_THREE, _EIGHT)])
CLASS_NAMES = ("3", "8")


def make_dataset(n, seed, flip=0.2):
    """``n`` images and labels (0 = "3", 1 = "8")."""
    g = generator(seed, "demo-data")
    labels = g.integers(0, 2, size=n)
    ink = TEMPLATES[labels] ^ (g.random((n, TEMPLATES.shape[1])) < flip)
    intensity = g.uniform(0.5, 1.0, size=ink.shape)
    return np.where(ink, intensity, 0.0), labels


def _write(path, data):
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(path, mode) as fh:
        fh.write(data)


def _explain_case(out, name, x, source, opts):
    case = os.path.join(out, name)
    os.makedirs(case, exist_ok=True)
    inst = Instance(x, 0.0, SHAPE)
    art = explain(inst, source, opts)
    _write(os.path.join(case, "instance.pgm"), pgm_bytes(intensity_pixels(x), SHAPE))
    _write(os.path.join(case, "artifact.json"), dumps(art))
    _write(os.path.join(case, "power_curve.tsv"), curve_tsv(art))
    _write(os.path.join(case, "mean.pgm"), render(art, "mean"))
    _write(os.path.join(case, "variance.pgm"), render(art, "variance"))
    for l in range(min(8, art["metadata"]["num_posterior_samples"])):
        _write(os.path.join(case, f"sample_{l}.pgm"), render(art, f"sample:{l}"))
    c = art["curve"]
    return {
        "selected_index": c["selected_index"],
        "selected_power": c["relative_power"][c["selected_index"]],
        "selected_complexity": c["mean_complexity"][c["selected_index"]],
        "densest_power": c["relative_power"][-1],
        "attained": c["attained"],
        "active_count": art["instance"]["active_count"],
    }


def run_demo(out, seed=0, num_train=300, num_test=200, alpha=1.0, num_posterior_samples=50,
             num_perturbations=1000, num_lambdas=50, target_power=0.8):
    os.makedirs(out, exist_ok=True)
    data_seed = derive_seed(seed, "demo-data")
    X, y = make_dataset(num_train + num_test, data_seed)
    Xtr, ytr, Xte, yte = X[:num_train], y[:num_train], X[num_train:], y[num_train:]
    rows = [f"{'train' if i < num_train else 'test'},{lab}," + ",".join(repr(float(v)) for v in x)
            for i, (x, lab) in enumerate(zip(X, y))]
    _write(os.path.join(out, "dataset.csv"), "split,label," + ",".join(f"px{j}" for j in range(X.shape[1]))
           + "\n" + "\n".join(rows) + "\n")
    post = fit_bayes_logistic(Xtr, ytr, alpha)
    _write(os.path.join(out, "model.json"), json.dumps(post.to_dict()) + "\n")

    pred = (sigmoid(post.intercept + Xte @ post.weights) > 0.5).astype(int)
    correct = np.flatnonzero(pred == yte)
    wrong = np.flatnonzero(pred != yte)
    source = BuiltinSource(post, num_posterior_samples, derive_seed(seed, "posterior"), "builtin:model.json")
    opts = ExplainOptions(seed=seed, num_perturbations=num_perturbations,
                          num_posterior_samples=num_posterior_samples, num_lambdas=num_lambdas,
                          target_power=target_power, full=True)
    summary = {"seed": seed, "test_accuracy": float(np.mean(pred == yte)), "cases": {}}
    for name, pool in (("correct", correct), ("misclassified", wrong)):
        if pool.size == 0:
            summary["cases"][name] = None
            continue
        i = int(pool[0])
        info = {"test_index": i, "label": CLASS_NAMES[yte[i]], "predicted": CLASS_NAMES[pred[i]]}
        info.update(_explain_case(out, name, Xte[i], source, opts))
        summary["cases"][name] = info
    _write(os.path.join(out, "summary.json"), json.dumps(summary, indent=2) + "\n")
    return summary
