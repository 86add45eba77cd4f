"""Kernel backend selection.

The hot geometry kernels (kNN, farthest point sampling, ball query, ray
casting) exist twice: a numba-compiled path and a pure-numpy fallback.
``CLOTHLAYERS_BACKEND`` picks one at import time:

    auto   (default) numba when importable, else numpy
    numba  require numba, fail loudly if missing
    numpy  force the pure-numpy path

Both paths implement identical tie-breaking (lower index wins) and return
identical neighbor indices; ``benchmarks/bench_kernels.py`` compares their
speed.
"""

from __future__ import annotations

import os
import warnings

import numpy as np

from . import cpu_numpy

_BACKEND_ENV = "CLOTHLAYERS_BACKEND"


def _select_backend() -> str:
    choice = os.environ.get(_BACKEND_ENV, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"{_BACKEND_ENV} must be one of auto|numba|numpy, got {choice!r}")
    if choice == "numpy":
        return "numpy"
    try:
        from . import cpu_numba  # noqa: F401
        return "numba"
    except ImportError:
        if choice == "numba":
            raise
        warnings.warn("numba unavailable, falling back to pure-numpy kernels")
        return "numpy"


_ACTIVE = _select_backend()
if _ACTIVE == "numba":
    from . import cpu_numba as _impl
else:
    _impl = cpu_numpy


def active_backend() -> str:
    """Name of the kernel path selected at import time."""
    return _ACTIVE


def build_grid(points: np.ndarray, cell: float):
    """Uniform hash grid over 3-D points as CSR arrays.

    Returns (origin (3,), cell, dims (3,) int64, cell_start, order) where
    ``order`` lists point indices grouped by cell (ascending inside a cell)
    and ``cell_start`` delimits each cell's slice.
    """
    p = np.ascontiguousarray(points, dtype=np.float64)
    origin = p.min(axis=0)
    extent = p.max(axis=0) - origin
    n = len(p)
    cell = float(cell)
    # keep the table bounded even for pathological cell sizes
    for _ in range(8):
        dims = np.floor(extent / cell).astype(np.int64) + 1
        if int(dims.prod()) <= max(64, 8 * n):
            break
        cell *= 1.6
    coords = np.floor((p - origin) / cell).astype(np.int64)
    coords = np.minimum(np.maximum(coords, 0), dims - 1)
    linear = (coords[:, 0] * dims[1] + coords[:, 1]) * dims[2] + coords[:, 2]
    order = np.argsort(linear, kind="stable").astype(np.int64)
    counts = np.bincount(linear, minlength=int(dims.prod()))
    cell_start = np.zeros(len(counts) + 1, dtype=np.int64)
    np.cumsum(counts, out=cell_start[1:])
    return origin, cell, dims, cell_start, order


def knn(query: np.ndarray, ref: np.ndarray, k: int):
    """Exact kNN dispatch: grid-accelerated for 3-D data on the numba path."""
    q = np.ascontiguousarray(query, dtype=np.float64)
    r = np.ascontiguousarray(ref, dtype=np.float64)
    if _ACTIVE == "numba" and r.shape[1] == 3 and len(r) >= 64:
        span = r.max(axis=0) - r.min(axis=0)
        vol = float(np.prod(np.maximum(span, 1e-12)))
        cell = (vol / len(r)) ** (1.0 / 3.0)
        if cell > 0 and np.isfinite(cell):
            grid = build_grid(r, cell)
            return _impl.knn_grid(q, r, k, *grid)
    return _impl.knn_brute(q, r, k)


def fps(points: np.ndarray, m: int, start: int) -> np.ndarray:
    p = np.ascontiguousarray(points, dtype=np.float64)
    return _impl.fps(p, int(m), int(start))


def ball_query(points: np.ndarray, center_idx: np.ndarray, radius: float,
               max_samples: int) -> np.ndarray:
    p = np.ascontiguousarray(points, dtype=np.float64)
    ci = np.ascontiguousarray(center_idx, dtype=np.int64)
    if _ACTIVE == "numba":
        if len(p) >= 64:
            grid = build_grid(p, max(radius, 1e-12))
            # 27-cell coverage requires cell >= radius; build_grid may only
            # have grown the cell, never shrunk it
            return _impl.ball_query_grid(p, ci, float(radius),
                                         int(max_samples), *grid)
        return _impl.ball_query_brute(p, ci, float(radius), int(max_samples))
    return cpu_numpy.ball_query(p, ci, float(radius), int(max_samples))


def raycast(origins: np.ndarray, dirs: np.ndarray, kind, pa, pb, r0, r1):
    o = np.ascontiguousarray(origins, dtype=np.float64)
    d = np.ascontiguousarray(dirs, dtype=np.float64)
    return _impl.raycast(o, d,
                         np.ascontiguousarray(kind, dtype=np.int64),
                         np.ascontiguousarray(pa, dtype=np.float64),
                         np.ascontiguousarray(pb, dtype=np.float64),
                         np.ascontiguousarray(r0, dtype=np.float64),
                         np.ascontiguousarray(r1, dtype=np.float64))


nearest_segment = cpu_numpy.nearest_segment
