"""Compare the numba and pure-numpy coordinate-descent backends.

    python benchmarks/bench_kernels.py [--features 64] [--samples 1000] [--repeat 20]

Times the inner kernel directly on the same problem, checks both return the
same solution, then times a short projection ensemble end-to-end in a fresh
interpreter for each backend (the backend is fixed at import time by
KLLIME_DISABLE_NUMBA).
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from kllime import kernels

ENSEMBLE_SNIPPET = """
import time, numpy as np
from kllime import BACKEND
from kllime.divergence import PredictionMatrix
from kllime.perturb import Instance, LocalityConfig, interpretable_rep, sample_perturbations
from kllime.projection import project_ensemble, sigmoid
rng = np.random.default_rng(0)
x = (rng.random({d}) < 0.4) * rng.uniform(0.5, 1, {d})
inst = Instance(x)
batch = sample_perturbations(inst, interpretable_rep(inst), LocalityConfig(num_samples={n}, seed=1))
theta = rng.normal(size=({L}, {d}))
preds = PredictionMatrix("bernoulli", p=sigmoid(2 * theta @ batch.originals.T - 0.3))
project_ensemble(batch, preds.row(0))  # warm-up / jit
t = time.perf_counter()
project_ensemble(batch, preds)
print(BACKEND, time.perf_counter() - t)
"""


def problem(d, n, seed=0):
    rng = np.random.default_rng(seed)
    Z = (rng.random((n, d)) < 0.5).astype(np.float64)
    y = Z @ (rng.normal(size=d) * (rng.random(d) < 0.3)) + rng.normal(scale=0.5, size=n)
    G, c = kernels.gram(Z, y, np.full(n, 1.0 / n))
    lam = 0.05 * np.max(np.abs(c[1:] - G[1:, 0] * c[0] / G[0, 0]))
    return G, c, lam


def time_kernel(fn, G, c, lam, repeat):
    best = np.inf
    for _ in range(repeat):
        theta = np.zeros(G.shape[0])
        t = time.perf_counter()
        sweeps, _ = fn(G, c, lam, theta, 10_000, 1e-7)
        best = min(best, time.perf_counter() - t)
    return best, sweeps, theta


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--features", type=int, default=64)
    ap.add_argument("--samples", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--posterior-samples", type=int, default=10)
    args = ap.parse_args()

    G, c, lam = problem(args.features, args.samples)
    kernels.cd_gram_numba(G, c, lam, np.zeros(G.shape[0]), 10, 1e-7)  # compile
    t_nb, sweeps, th_nb = time_kernel(kernels.cd_gram_numba, G, c, lam, args.repeat)
    t_np, _, th_np = time_kernel(kernels.cd_gram_numpy, G, c, lam, max(1, args.repeat // 5))
    print(f"kernel  p={args.features} sweeps={sweeps}")
    print(f"  numba {t_nb * 1e3:9.3f} ms")
    print(f"  numpy {t_np * 1e3:9.3f} ms   ({t_np / t_nb:.1f}x)")
    print(f"  max |numba - numpy| = {np.max(np.abs(th_nb - th_np)):.3g}")

    snippet = ENSEMBLE_SNIPPET.format(d=args.features, n=args.samples, L=args.posterior_samples)
    print(f"ensemble  L={args.posterior_samples} N={args.samples} K=50")
    for flag in ("0", "1"):
        env = dict(os.environ, KLLIME_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", snippet], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        print(f"  {out[0]:5s} {float(out[1]):9.3f} s")


if __name__ == "__main__":
    main()
