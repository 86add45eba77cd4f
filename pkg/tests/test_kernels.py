"""Cross-backend parity: the numba kernels must reproduce the numpy path."""

import numpy as np
import pytest

from clothlayers import _kernels
from clothlayers._kernels import cpu_numpy

numba_impl = pytest.importorskip("clothlayers._kernels.cpu_numba")


def test_active_backend_reports_a_known_name():
    assert _kernels.active_backend() in ("numba", "numpy")


@pytest.mark.parametrize("n,k", [(10, 3), (100, 5), (257, 17), (512, 1)])
def test_knn_brute_parity(n, k):
    rng = np.random.default_rng(n * 31 + k)
    ref = rng.uniform(-2, 2, size=(n, 3))
    query = rng.uniform(-2, 2, size=(n // 2 + 1, 3))
    ia, da = numba_impl.knn_brute(query, ref, k)
    ib, db = cpu_numpy.knn_brute(query, ref, k)
    np.testing.assert_array_equal(ia, ib)
    np.testing.assert_array_equal(da, db)


@pytest.mark.parametrize("n,k", [(128, 4), (400, 9), (2000, 16)])
def test_knn_grid_matches_brute(n, k):
    rng = np.random.default_rng(n + k)
    ref = rng.uniform(-1, 1, size=(n, 3))
    query = rng.uniform(-1.5, 1.5, size=(n, 3))  # some queries off the grid
    span = ref.max(0) - ref.min(0)
    cell = float((np.prod(span) / n) ** (1 / 3))
    grid = _kernels.build_grid(ref, cell)
    ig, dg = numba_impl.knn_grid(query, ref, k, *grid)
    ib, db = cpu_numpy.knn_brute(query, ref, k)
    np.testing.assert_array_equal(ig, ib)
    np.testing.assert_array_equal(dg, db)


def test_knn_grid_clustered_data():
    # two tight clusters stress the ring-expansion stopping rule
    rng = np.random.default_rng(9)
    a = rng.normal(0, 0.01, size=(300, 3))
    b = rng.normal(0, 0.01, size=(300, 3)) + [5, 0, 0]
    ref = np.concatenate([a, b])
    cell = float((np.prod(ref.max(0) - ref.min(0)) / len(ref)) ** (1 / 3))
    grid = _kernels.build_grid(ref, cell)
    ig, _ = numba_impl.knn_grid(ref, ref, 8, *grid)
    ib, _ = cpu_numpy.knn_brute(ref, ref, 8)
    np.testing.assert_array_equal(ig, ib)


def test_knn_feature_dim_parity():
    rng = np.random.default_rng(2)
    feats = rng.normal(size=(300, 64))
    ia, da = numba_impl.knn_brute(feats, feats, 12)
    ib, db = cpu_numpy.knn_brute(feats, feats, 12)
    np.testing.assert_array_equal(ia, ib)
    np.testing.assert_allclose(da, db, rtol=1e-12)


@pytest.mark.parametrize("n,m", [(64, 8), (300, 60), (512, 512)])
def test_fps_parity(n, m):
    rng = np.random.default_rng(n)
    pts = rng.normal(size=(n, 3))
    np.testing.assert_array_equal(numba_impl.fps(pts, m, 3),
                                  cpu_numpy.fps(pts, m, 3))


@pytest.mark.parametrize("radius,cap", [(0.2, 4), (0.5, 16), (2.0, 8)])
def test_ball_query_parity(radius, cap):
    rng = np.random.default_rng(17)
    pts = rng.uniform(-1, 1, size=(400, 3))
    centers = rng.integers(0, 400, size=50).astype(np.int64)
    grid = _kernels.build_grid(pts, radius)
    ga = numba_impl.ball_query_grid(pts, centers, radius, cap, *grid)
    gb = cpu_numpy.ball_query(pts, centers, radius, cap)
    gc = numba_impl.ball_query_brute(pts, centers, radius, cap)
    np.testing.assert_array_equal(ga, gb)
    np.testing.assert_array_equal(gc, gb)


def test_raycast_parity(overlap_scene):
    rng = np.random.default_rng(5)
    n = 500
    origins = rng.uniform(-2, 2, size=(n, 3)) + [0, 0, 1]
    origins[:, 1] -= 3.0  # pull origins outside the scene
    target = rng.uniform(-0.3, 0.3, size=(n, 3)) + [0, 0, 1.0]
    dirs = target - origins
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    prims = overlap_scene.prim_arrays()
    args = [np.ascontiguousarray(origins), np.ascontiguousarray(dirs),
            prims[0].astype(np.int64)] + [np.asarray(p, float) for p in prims[1:]]
    ta, pa = numba_impl.raycast(*args)
    tb, pb = cpu_numpy.raycast(*args)
    np.testing.assert_array_equal(pa, pb)
    hit = pa >= 0
    np.testing.assert_allclose(ta[hit], tb[hit], rtol=1e-12, atol=0)
    assert hit.sum() > n // 2


def test_backend_env_flag_selects_numpy():
    import subprocess
    import sys
    code = ("import clothlayers; "
            "print(clothlayers.active_backend())")
    out = subprocess.run([sys.executable, "-c", code],
                         env={"PATH": "/usr/bin:/bin:/usr/local/bin",
                              "CLOTHLAYERS_BACKEND": "numpy"},
                         capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
