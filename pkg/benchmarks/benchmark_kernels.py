"""Benchmark the compiled boundary-integral kernels against the NumPy
fallback, and a representative RK4 step built on each.

Usage:  python benchmarks/benchmark_kernels.py [--sizes 256,512,1024,2048]
"""

import argparse
import math
import time

import numpy as np

from patchdyn import _core_py, kernels


def polygon(n):
    th = 2 * math.pi * np.arange(n) / n
    v = np.column_stack([np.cos(th), np.sin(th)])
    return v * math.sqrt(math.pi / (0.5 * n * math.sin(2 * math.pi / n)))


def time_call(fn, *args, repeat=3):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--sizes", default="256,512,1024,2048")
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    if not kernels.HAVE_COMPILED:
        print("compiled extension not built; benchmarking fallback only")

    rng = np.random.default_rng(0)
    header = (f"{'M':>6} {'pairs':>10} | {'compiled':>12} {'python':>12} "
              f"{'speedup':>8} | {'max diff':>10}")
    for kind in ("induced_velocity", "log_potential"):
        print(f"\n== {kind} ==")
        print(header)
        for n in sizes:
            verts = polygon(n)
            pts = rng.normal(size=(n, 2)) * 1.5
            py_fn = getattr(_core_py, kind)
            t_py, out_py = time_call(py_fn, verts, pts)
            if kernels.HAVE_COMPILED:
                from patchdyn import _core
                c_fn = getattr(_core, kind)
                t_c, out_c = time_call(c_fn, verts, pts)
                diff = float(np.max(np.abs(out_c - out_py)))
                rate_c = n * n / t_c / 1e6
                print(f"{n:>6} {n*n:>10} | {t_c*1e3:>9.2f} ms {t_py*1e3:>9.2f} ms "
                      f"{t_py/t_c:>7.1f}x | {diff:>10.2e}  "
                      f"({rate_c:.0f} Mpairs/s compiled)")
            else:
                print(f"{n:>6} {n*n:>10} | {'-':>12} {t_py*1e3:>9.2f} ms")

    # one full RK4 step of a 1024-node contour, the dominant inner loop of
    # every simulation in this package
    from patchdyn.dynamics import FlowState, MarkerSet, step
    from patchdyn.patch_builder import rankine

    state = FlowState(0.0, rankine(1.0, 1024).boundary, MarkerSet.empty())
    t_step, _ = time_call(lambda: step(state, 1e-3), repeat=3)
    print(f"\nRK4 step, M=1024 ({kernels.BACKEND} backend): {t_step*1e3:.1f} ms")


if __name__ == "__main__":
    main()
