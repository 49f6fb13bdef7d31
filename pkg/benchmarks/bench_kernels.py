"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--sizes 12 16 20] [--repeat 3]

Prints one row per kernel/size with the best wall time of each backend and
the speedup. Both backends are checked for agreement before timing.
"""

import argparse
import time

import numpy as np

from metric_forge import _kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(name, make_call, repeat):
    out = {}
    results = {}
    for backend in ("numba", "numpy"):
        _kernels.set_backend(backend)
        call = make_call()
        results[backend] = call()  # warm-up (and jit compile)
        out[backend] = best_of(call, repeat)
    a, b = results["numba"], results["numpy"]
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-10, atol=1e-12)
    speed = out["numpy"] / out["numba"] if out["numba"] > 0 else float("inf")
    print(f"{name:<28} numba {out['numba'] * 1e3:9.2f} ms   numpy {out['numpy'] * 1e3:9.2f} ms   x{speed:6.1f}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[12, 16, 20])
    ap.add_argument("--rows", type=int, nargs="+", default=[1_000, 10_000, 100_000])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    original = _kernels.backend()

    for size in args.sizes:
        den = rng.dirichlet(np.ones(size))
        num = den * rng.uniform(-5, 5, size)
        bench(f"vertex_values S={size}", lambda: (lambda: _kernels.vertex_values(num, den, 0.0, 1.0, True)), args.repeat)

    for rows in args.rows:
        groups = rng.integers(0, max(2, rows // 20), rows)
        probs = rng.dirichlet(np.ones(rows))
        mu0, mu1 = rng.normal(size=rows), rng.normal(size=rows)
        n_groups = int(groups.max()) + 1
        bench(
            f"asym_stats rows={rows}",
            lambda: (lambda: _kernels.asym_stats(groups, n_groups, probs, mu0, mu1)),
            args.repeat,
        )
    _kernels.set_backend(original)


if __name__ == "__main__":
    main()
