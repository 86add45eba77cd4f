"""Benchmark the numba kernels against the pure-numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--quick]

Both paths compute identical results (the test suite asserts exact parity);
this script reports wall-clock speedups on representative workloads.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from clothlayers import _kernels
from clothlayers._kernels import cpu_numpy

try:
    from clothlayers._kernels import cpu_numba
except ImportError:
    cpu_numba = None


def timeit(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_rows(quick: bool):
    rng = np.random.default_rng(0)
    n = 4_000 if quick else 20_000
    pts = rng.uniform(-1, 1, size=(n, 3))
    feats = rng.normal(size=(n // 8, 64))
    centers = rng.integers(0, n, size=n // 4).astype(np.int64)

    from clothlayers.scene import sample_outfit, sample_scene
    from clothlayers.layering import GarmentClass
    outfit = sample_outfit(GarmentClass.T_SHIRT, GarmentClass.LONG_PANTS,
                           0.08, rng)
    scene = sample_scene(outfit, seed=0)
    prims = scene.prim_arrays()
    origins = rng.uniform(-1, 1, size=(n, 3)) + [0, -3.0, 1.0]
    dirs = rng.uniform(-0.2, 0.2, size=(n, 3)) + [0, 1.0, 0]
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    prim_args = (prims[0].astype(np.int64),) + tuple(
        np.asarray(p, float) for p in prims[1:])

    cell = float((np.prod(pts.max(0) - pts.min(0)) / n) ** (1 / 3))
    grid_knn = _kernels.build_grid(pts, cell)
    grid_ball = _kernels.build_grid(pts, 0.1)

    rows = []

    def add(name, numpy_fn, numba_fn):
        t_np = timeit(numpy_fn)
        if numba_fn is not None:
            numba_fn()  # compile outside the timer
            t_nb = timeit(numba_fn)
        else:
            t_nb = float("nan")
        rows.append((name, t_np, t_nb))

    add(f"knn 3d (n={n}, k=16)",
        lambda: cpu_numpy.knn_brute(pts, pts, 16),
        (lambda: cpu_numba.knn_grid(pts, pts, 16, *grid_knn))
        if cpu_numba else None)
    add(f"knn feature 64-d (n={len(feats)}, k=16)",
        lambda: cpu_numpy.knn_brute(feats, feats, 16),
        (lambda: cpu_numba.knn_brute(feats, feats, 16))
        if cpu_numba else None)
    add(f"fps (n={n}, m={n // 8})",
        lambda: cpu_numpy.fps(pts, n // 8, 0),
        (lambda: cpu_numba.fps(pts, n // 8, 0)) if cpu_numba else None)
    add(f"ball query (n={n}, m={len(centers)}, r=0.1)",
        lambda: cpu_numpy.ball_query(pts, centers, 0.1, 16),
        (lambda: cpu_numba.ball_query_grid(pts, centers, 0.1, 16, *grid_ball))
        if cpu_numba else None)
    add(f"raycast ({n} rays x {len(prims[0])} prims)",
        lambda: cpu_numpy.raycast(origins, dirs, *prim_args),
        (lambda: cpu_numba.raycast(origins, dirs, *prim_args))
        if cpu_numba else None)
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true", help="smaller workloads")
    args = ap.parse_args()
    print(f"active backend: {_kernels.active_backend()}")
    rows = bench_rows(args.quick)
    width = max(len(r[0]) for r in rows)
    print(f"{'kernel'.ljust(width)}  {'numpy':>10}  {'numba':>10}  {'speedup':>8}")
    for name, t_np, t_nb in rows:
        speed = t_np / t_nb if t_nb == t_nb else float("nan")
        print(f"{name.ljust(width)}  {t_np * 1e3:9.1f}ms  {t_nb * 1e3:9.1f}ms"
              f"  {speed:7.1f}x")


if __name__ == "__main__":
    main()
