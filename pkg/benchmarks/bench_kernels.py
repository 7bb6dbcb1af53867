"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--size 129] [--repeat 5]
"""
import argparse
import time

import numpy as np

from wavetomo import kernels


def best_of(fn, repeat):
    fn()  # warm-up (JIT compile for numba)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_leapfrog(n, repeat):
    rng = np.random.default_rng(0)
    u0, u1, a, q, f = (rng.standard_normal((n, n)) for _ in range(5))
    out = np.zeros((n, n))
    inv_h2 = np.array([float((n - 1) ** 2)] * 2)
    dt = 0.5 / (n - 1)
    rows = {}
    for backend in ("numpy", "numba"):
        if backend == "numba" and not kernels.HAVE_NUMBA:
            continue

        def step():
            for _ in range(20):
                kernels.leapfrog_step(u0, u1, a, q, f, dt, inv_h2, out, backend)
        rows[backend] = best_of(step, repeat) / 20
    return rows


def bench_rays(n, repeat):
    rng = np.random.default_rng(1)
    vals = rng.standard_normal((n, n, n))
    h = 1.0 / (n - 1)
    starts = rng.uniform(0.0, 1.0, size=(4096, 3))
    d = np.array([1.0, -1.0, 0.0])
    step = h / (2.0 * np.linalg.norm(d))
    rows = {}
    for backend in ("numpy", "numba"):
        if backend == "numba" and not kernels.HAVE_NUMBA:
            continue
        rows[backend] = best_of(lambda: kernels.ray_sums(vals, (0.0, 0.0, 0.0), (h, h, h), starts, d, step,
                                                         backend), repeat)
    return rows


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--size", type=int, default=129)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    for name, rows in (("leapfrog step (%d^2)" % args.size, bench_leapfrog(args.size, args.repeat)),
                       ("ray sums (4096 rays, %d^3)" % (args.size // 2), bench_rays(args.size // 2, args.repeat))):
        line = ", ".join(f"{k}: {v * 1e3:.3f} ms" for k, v in rows.items())
        if len(rows) == 2:
            line += f"  (speed-up x{rows['numpy'] / rows['numba']:.1f})"
        print(f"{name}: {line}")


if __name__ == "__main__":
    main()
