"""Timing comparison of the compiled and NumPy kernel backends.

Run as ``python benchmarks/bench_kernels.py``.  Workloads are sized like
the experiment hot paths: batched permanent gradients (association-loss
engines) and masked particle smoothing (detection-failure engine).
"""

import time

import numpy as np

from mtt_fisher import _kernels_py
from mtt_fisher.rngstream import rng_stream

try:
    from mtt_fisher import _kernels_c
except ImportError:
    _kernels_c = None

BACKENDS = [("numpy", _kernels_py)] + ([("compiled", _kernels_c)] if _kernels_c else [])


def timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_permanent():
    rng = rng_stream(0, 1)
    print("batch_permanent_gradient")
    for k, batch in [(5, 20000), (8, 20000), (10, 10000)]:
        diff = rng.standard_normal((batch, k, k))
        g = np.exp(-0.5 * diff**2)
        gd = g * diff
        results = {}
        for name, impl in BACKENDS:
            sec, out = timeit(lambda impl=impl: impl.batch_permanent_gradient(g, gd))
            results[name] = (sec, out)
            rate = batch / sec
            print(f"  K={k:2d} B={batch}: {name:8s} {sec * 1e3:8.1f} ms  ({rate:,.0f} matrices/s)")
        if len(results) == 2:
            a = results["numpy"][1]
            b = results["compiled"][1]
            assert np.allclose(a[0], b[0], equal_nan=True)
            assert np.allclose(a[1], b[1], equal_nan=True)
            print(f"           speedup x{results['numpy'][0] / results['compiled'][0]:.1f}")


def bench_pf():
    rng = rng_stream(0, 2)
    print("pf_masked_score")
    for batch, n, n_particles in [(200, 50, 500), (500, 50, 500)]:
        x = 0.1 * np.cumsum(rng.standard_normal((batch, n)), axis=1)
        y = x + rng.standard_normal((batch, n))
        det = rng.random((batch, n)) < 0.5
        noise = rng.standard_normal((batch, n, n_particles))
        res_u = rng.random((batch, n))
        results = {}
        for name, impl in BACKENDS:
            sec, out = timeit(
                lambda impl=impl: impl.pf_masked_score(
                    y, det, 0.0, 0.1, 1.0, 0, 1.0, noise, res_u
                )
            )
            results[name] = (sec, out)
            rate = batch * n * n_particles / sec
            print(
                f"  B={batch} n={n} N={n_particles}: {name:8s} {sec * 1e3:8.1f} ms  "
                f"({rate / 1e6:,.0f}M particle-steps/s)"
            )
        if len(results) == 2:
            for i in range(2):
                assert np.allclose(results["numpy"][1][i], results["compiled"][1][i])
            print(f"           speedup x{results['numpy'][0] / results['compiled'][0]:.1f}")


if __name__ == "__main__":
    if _kernels_c is None:
        print("compiled backend unavailable; timing the NumPy fallback only")
    bench_permanent()
    bench_pf()
