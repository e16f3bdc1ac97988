"""Compare the compiled and pure-numpy kernel paths.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints best-of-N wall time per kernel and the speedup of the compiled path.
Both paths are also checked for agreement on the benchmark inputs.
"""
import argparse
import time

import numpy as np

from tpifm import kernels
from tpifm._accel import HAVE_NUMBA


def best_of(fn, repeat):
    fn()  # warm-up; also triggers compilation
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(rng):
    n = 1_000_000
    d = rng.uniform(0, 3000, n)
    rs = rng.uniform(0, 0.6, n)
    qd, qs = rng.uniform(1, 5, (2, n))
    x = np.array([100, 200, 300, 500, 800, 1000.0])
    y = 4.7 * np.exp(-4e-4 * x) + rng.normal(0, 0.1, x.size)
    a = np.linspace(2.35, 9.4, 2000)
    b = np.linspace(0, 1.6e-3, 2000)
    return {
        "exp_decay_clamped (1e6)": lambda u: kernels.exp_decay_clamped(
            d, 4.764, 4.86e-4, use_numba=u),
        "combined_clamped (1e6)": lambda u: kernels.combined_clamped(
            qd, qs, 0.104, 0.192, use_numba=u),
        "tpifm_batch (1e6)": lambda u: kernels.tpifm_batch(
            d, rs, 4.751, 4.86e-4, 4.929, 9.291, 0.104, 0.192, use_numba=u),
        "sse_grid (2000x2000, 6 pts)": lambda u: kernels.sse_grid(
            x, y, a, b, kernels.EXP_FORM, use_numba=u),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy path is available")
    print(f"{'kernel':<30}{'numpy s':>10}{'numba s':>10}{'speedup':>9}")
    for name, fn in cases(np.random.default_rng(args.seed)).items():
        t_np = best_of(lambda: fn(False), args.repeat)
        if HAVE_NUMBA:
            np.testing.assert_allclose(fn(True), fn(False), rtol=1e-12, atol=1e-12)
            t_nb = best_of(lambda: fn(True), args.repeat)
            print(f"{name:<30}{t_np:>10.4f}{t_nb:>10.4f}{t_np / t_nb:>8.1f}x")
        else:
            print(f"{name:<30}{t_np:>10.4f}{'-':>10}{'-':>9}")


if __name__ == "__main__":
    main()
