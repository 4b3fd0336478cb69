import os
import sys

import numpy as np
import pytest
from hypothesis import settings

from kllime.models import fit_bayes_linear
from kllime.perturb import BINARY_PRESENCE, PerturbationBatch

settings.register_profile("repro", derandomize=True, database=None)
settings.load_profile("repro")

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
GOLDEN = os.path.join(ROOT, "tests", "golden")


def binary_batch(rng, p, n, random_weights=False, min_sv=0.05):
    """Random full-rank binary design wrapped as a batch over ``p`` features."""
    for _ in range(1000):
        Z = (rng.random((n, p)) < rng.uniform(0.3, 0.7)).astype(np.uint8)
        w = rng.dirichlet(np.ones(n)) if random_weights else np.full(n, 1.0 / n)
        X = np.hstack([np.ones((n, 1)), Z])
        sv = np.linalg.svd(np.sqrt(w)[:, None] * X, compute_uv=False)
        if sv[-1] / sv[0] > min_sv:
            return PerturbationBatch(Z.astype(np.float64), Z, w, np.arange(p), BINARY_PRESENCE)
    raise RuntimeError("could not draw a well-conditioned design")


def soft_targets(rng, batch, scale=1.5):
    Z = batch.design()
    eta = rng.normal() + Z @ rng.normal(scale=scale, size=Z.shape[1]) + 0.3 * rng.normal(size=Z.shape[0])
    return 1.0 / (1.0 + np.exp(-eta))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def linear_posterior():
    """Bayesian linear model on 8 features (no intercept column)."""
    g = np.random.default_rng(7)
    X = g.normal(size=(120, 8))
    y = X @ g.normal(size=8) + 0.3 * g.normal(size=120)
    return fit_bayes_linear(X, y, alpha=1.0, a0=2.0, b0=1.0)


def run_cli(*args, cwd=None, env=None):
    import subprocess
    return subprocess.run([sys.executable, "-m", "kllime", *args], cwd=cwd, env=env,
                          capture_output=True, text=True)


_ACCEPTANCE = []


@pytest.fixture
def acceptance(request):
    """Report one PASS/FAIL line for an acceptance criterion, then assert it."""
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def report(number, name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {name}: {detail}"
        _ACCEPTANCE.append(line)
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
