"""Compiled vs numpy midpoint propagation over the batch sizes a channel build uses.

    python benchmarks/bench_backend.py [--steps 1500] [--batch 64]
"""

import argparse
import time

import numpy as np

from gdl import _propagate

try:
    from gdl import _kernels
except ImportError:
    _kernels = None


def problem(dim, batch, seed=0):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(batch, dim, dim)) + 1j * rng.normal(size=(batch, dim, dim))
    H0 = 0.5 * (G + np.conj(np.swapaxes(G, 1, 2)))
    G = rng.normal(size=(batch, dim, dim)) + 1j * rng.normal(size=(batch, dim, dim))
    V = 0.5 * (G + np.conj(np.swapaxes(G, 1, 2)))
    return H0, V


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=1500)
    ap.add_argument("--batch", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    coeffs = 0.05 * np.exp(-np.linspace(-3, 3, args.steps) ** 2)
    dt = 1.0 / 64
    print(f"{'dim':>4} {'numpy s':>10} {'cython s':>10} {'speedup':>8} {'max diff':>10}")
    for dim in (4, 8, 16):
        H0, V = problem(dim, args.batch)
        tn, Un = best_of(lambda: _propagate.midpoint_batch(H0, V, coeffs, dt), args.repeats)
        if _kernels is None:
            print(f"{dim:>4} {tn:10.3f} {'n/a':>10} {'n/a':>8} {'n/a':>10}")
            continue
        tc, Uc = best_of(lambda: _kernels.midpoint_batch(H0, V, coeffs, dt), args.repeats)
        print(f"{dim:>4} {tn:10.3f} {tc:10.3f} {tn / tc:8.2f} {np.max(np.abs(Un - Uc)):10.2e}")


if __name__ == "__main__":
    main()
