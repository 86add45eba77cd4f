"""Pure-numpy kernel implementations.

These are the reference/fallback path selected with CLOTHLAYERS_BACKEND=numpy.
The numba twins in ``cpu_numba`` follow the same arithmetic step-for-step so
both paths produce identical indices (and bitwise-identical distances for 3-D
inputs). Tie-breaking is everywhere by lower index.

Kernel contracts:
  * ray directions are unit vectors,
  * squared distances are returned (callers take the sqrt),
  * primitive arrays use the layout documented in ``clothlayers.scene``:
    kind 0 = capsule (a, b, r), 1 = tube wall (a, b, R),
    2 = annular ring (center, unit axis, R_inner, R_outer),
    3 = dome cap (center, unit outward axis, R).
"""

from __future__ import annotations

import numpy as np

T_MIN = 1e-9
_CHUNK_ELEMS = 4_000_000  # cap on Q*R*D temporaries per knn chunk


def knn_brute(query: np.ndarray, ref: np.ndarray, k: int):
    """Exact k nearest neighbors by squared Euclidean distance.

    Returns (indices (Q,k) int64, squared distances (Q,k) float64), rows
    sorted by (distance, index).
    """
    q = np.ascontiguousarray(query, dtype=np.float64)
    r = np.ascontiguousarray(ref, dtype=np.float64)
    nq, d = q.shape
    nr = r.shape[0]
    idx = np.empty((nq, k), dtype=np.int64)
    dist = np.empty((nq, k), dtype=np.float64)
    chunk = max(1, _CHUNK_ELEMS // max(1, nr * d))
    for lo in range(0, nq, chunk):
        hi = min(nq, lo + chunk)
        diff = q[lo:hi, None, :] - r[None, :, :]
        d2 = np.einsum("qrd,qrd->qr", diff, diff) if d > 3 else (diff ** 2).sum(-1)
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        idx[lo:hi] = order
        dist[lo:hi] = np.take_along_axis(d2, order, axis=1)
    return idx, dist


def fps(points: np.ndarray, m: int, start: int) -> np.ndarray:
    """Greedy farthest point sampling; ties go to the lower index."""
    p = np.ascontiguousarray(points, dtype=np.float64)
    out = np.empty(m, dtype=np.int64)
    out[0] = start
    d2 = ((p - p[start]) ** 2).sum(-1)
    for i in range(1, m):
        j = int(np.argmax(d2))
        out[i] = j
        d2 = np.minimum(d2, ((p - p[j]) ** 2).sum(-1))
    return out


def ball_query(points: np.ndarray, center_idx: np.ndarray, radius: float,
               max_samples: int) -> np.ndarray:
    """Nearest-first neighbors within ``radius``; short groups repeat the center."""
    p = np.ascontiguousarray(points, dtype=np.float64)
    r2 = float(radius) * float(radius)
    out = np.empty((len(center_idx), max_samples), dtype=np.int64)
    for i, c in enumerate(np.asarray(center_idx, dtype=np.int64)):
        d2 = ((p - p[c]) ** 2).sum(-1)
        cand = np.nonzero(d2 <= r2)[0]
        order = np.lexsort((cand, d2[cand]))[:max_samples]
        sel = cand[order]
        out[i, : len(sel)] = sel
        out[i, len(sel):] = c
    return out


# --- ray casting --------------------------------------------------------

def _cylinder_hits(o, d, a, b, radius):
    """Both roots of the infinite-cylinder equation plus axial positions.

    Returns (t1, t2, s1, s2, ok) where s is the signed axial coordinate in
    meters measured from ``a`` and ok marks rays with a real intersection.
    """
    u = b - a
    ell = float(np.sqrt(u @ u))
    uh = u / ell
    w = o - a
    du = d @ uh
    wu = w @ uh
    acoef = 1.0 - du * du
    bcoef = 2.0 * ((w * d).sum(-1) - du * wu)
    ccoef = (w * w).sum(-1) - wu * wu - radius * radius
    ok = acoef > 1e-14
    asafe = np.where(ok, acoef, 1.0)
    disc = bcoef * bcoef - 4.0 * asafe * ccoef
    ok &= disc >= 0.0
    sq = np.sqrt(np.where(disc >= 0.0, disc, 0.0))
    t1 = (-bcoef - sq) / (2.0 * asafe)
    t2 = (-bcoef + sq) / (2.0 * asafe)
    s1 = wu + t1 * du
    s2 = wu + t2 * du
    return t1, t2, s1, s2, ok, ell


def _sphere_hits(o, d, c, radius):
    w = o - c
    bcoef = 2.0 * (w * d).sum(-1)
    ccoef = (w * w).sum(-1) - radius * radius
    disc = bcoef * bcoef - 4.0 * ccoef
    ok = disc >= 0.0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t1 = (-bcoef - sq) / 2.0
    t2 = (-bcoef + sq) / 2.0
    return t1, t2, ok


def _capsule_t(o, d, a, b, r):
    t1, t2, s1, s2, ok, ell = _cylinder_hits(o, d, a, b, r)
    t = np.full(len(o), np.inf)
    v1 = ok & (t1 > T_MIN) & (s1 >= 0.0) & (s1 <= ell)
    v2 = ok & (t2 > T_MIN) & (s2 >= 0.0) & (s2 <= ell)
    t = np.where(v1, t1, np.where(v2, t2, t))
    for c in (a, b):
        st1, st2, sok = _sphere_hits(o, d, c, r)
        sv1 = sok & (st1 > T_MIN)
        sv2 = sok & (st2 > T_MIN)
        ts = np.where(sv1, st1, np.where(sv2, st2, np.inf))
        t = np.minimum(t, ts)
    return t


def _tube_t(o, d, a, b, radius):
    t1, t2, s1, s2, ok, ell = _cylinder_hits(o, d, a, b, radius)
    t = np.full(len(o), np.inf)
    v1 = ok & (t1 > T_MIN) & (s1 >= 0.0) & (s1 <= ell)
    v2 = ok & (t2 > T_MIN) & (s2 >= 0.0) & (s2 <= ell)
    return np.where(v1, t1, np.where(v2, t2, t))


def _ring_t(o, d, c, n, r_in, r_out):
    dn = d @ n
    ok = np.abs(dn) > 1e-12
    dn_safe = np.where(ok, dn, 1.0)
    t = ((c - o) @ n) / dn_safe
    h = o + t[:, None] * d - c
    rad2 = (h * h).sum(-1)
    ok &= (t > T_MIN) & (rad2 >= r_in * r_in) & (rad2 <= r_out * r_out)
    return np.where(ok, t, np.inf)


def _dome_t(o, d, c, n, radius):
    t1, t2, ok = _sphere_hits(o, d, c, radius)
    t = np.full(len(o), np.inf)
    h1 = (o + t1[:, None] * d - c) @ n
    h2 = (o + t2[:, None] * d - c) @ n
    v1 = ok & (t1 > T_MIN) & (h1 >= -1e-12)
    v2 = ok & (t2 > T_MIN) & (h2 >= -1e-12)
    return np.where(v1, t1, np.where(v2, t2, t))


def raycast(origins: np.ndarray, dirs: np.ndarray, kind: np.ndarray,
            pa: np.ndarray, pb: np.ndarray, r0: np.ndarray, r1: np.ndarray):
    """First hit of each ray against the primitive set.

    Returns (t (R,) float64 with inf for misses, prim (R,) int64 with -1).
    On equal t the lower primitive index wins.
    """
    o = np.ascontiguousarray(origins, dtype=np.float64)
    d = np.ascontiguousarray(dirs, dtype=np.float64)
    best_t = np.full(len(o), np.inf)
    best_p = np.full(len(o), -1, dtype=np.int64)
    for p in range(len(kind)):
        kp = int(kind[p])
        if kp == 0:
            t = _capsule_t(o, d, pa[p], pb[p], float(r0[p]))
        elif kp == 1:
            t = _tube_t(o, d, pa[p], pb[p], float(r0[p]))
        elif kp == 2:
            t = _ring_t(o, d, pa[p], pb[p], float(r0[p]), float(r1[p]))
        else:
            t = _dome_t(o, d, pa[p], pb[p], float(r0[p]))
        better = t < best_t
        best_t[better] = t[better]
        best_p[better] = p
    return best_t, best_p


def nearest_segment(points: np.ndarray, seg_a: np.ndarray, seg_b: np.ndarray,
                    seg_r: np.ndarray):
    """Nearest capsule segment by signed surface distance.

    Returns (seg index (P,), axial fraction in [0,1] (P,), signed distance (P,)).
    """
    x = np.ascontiguousarray(points, dtype=np.float64)
    u = seg_b - seg_a                                    # (S, 3)
    ell2 = (u * u).sum(-1)
    w = x[:, None, :] - seg_a[None, :, :]                # (P, S, 3)
    s = np.clip((w * u[None]).sum(-1) / ell2[None], 0.0, 1.0)
    closest = seg_a[None] + s[..., None] * u[None]
    diff = x[:, None, :] - closest
    dist = np.sqrt((diff * diff).sum(-1))
    sdf = dist - seg_r[None, :]
    seg = np.argmin(sdf, axis=1)
    rows = np.arange(len(x))
    return seg.astype(np.int64), s[rows, seg], sdf[rows, seg]
