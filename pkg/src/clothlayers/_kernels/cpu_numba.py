"""Numba-accelerated kernels (default path).

Each function mirrors its twin in ``cpu_numpy`` operation-for-operation so the
two backends return identical neighbor indices and (for 3-D geometry)
bitwise-identical distances. Keep the arithmetic in sync when editing either
side. fastmath stays off: reassociation would break cross-backend parity.
"""

from __future__ import annotations

import numpy as np
from numba import njit

T_MIN = 1e-9


@njit(cache=True)
def _kbest_insert(bd, bi, count, d2, j):
    """Insert (d2, j) into the sorted k-best arrays; lower index wins ties."""
    k = bd.shape[0]
    if count < k:
        pos = count
        count += 1
    else:
        last = k - 1
        if d2 > bd[last] or (d2 == bd[last] and j > bi[last]):
            return count
        pos = last
    while pos > 0 and (bd[pos - 1] > d2 or (bd[pos - 1] == d2 and bi[pos - 1] > j)):
        bd[pos] = bd[pos - 1]
        bi[pos] = bi[pos - 1]
        pos -= 1
    bd[pos] = d2
    bi[pos] = j
    return count


@njit(cache=True)
def knn_brute(query, ref, k):
    nq = query.shape[0]
    nr = ref.shape[0]
    d = query.shape[1]
    idx = np.empty((nq, k), dtype=np.int64)
    dist = np.empty((nq, k), dtype=np.float64)
    bd = np.empty(k, dtype=np.float64)
    bi = np.empty(k, dtype=np.int64)
    for qi in range(nq):
        count = 0
        for j in range(nr):
            d2 = 0.0
            for c in range(d):
                t = query[qi, c] - ref[j, c]
                d2 += t * t
            count = _kbest_insert(bd, bi, count, d2, j)
        for c in range(k):
            idx[qi, c] = bi[c]
            dist[qi, c] = bd[c]
    return idx, dist


@njit(cache=True)
def knn_grid(query, ref, k, origin, cell, dims, cell_start, order):
    """Exact grid-accelerated kNN for 3-D points.

    Scans Chebyshev rings of cells outward; after finishing ring R every
    unscanned point is strictly farther than R*cell, so the search stops as
    soon as the current k-th distance is below that bound.
    """
    nq = query.shape[0]
    idx = np.empty((nq, k), dtype=np.int64)
    dist = np.empty((nq, k), dtype=np.float64)
    bd = np.empty(k, dtype=np.float64)
    bi = np.empty(k, dtype=np.int64)
    nx, ny, nz = dims[0], dims[1], dims[2]
    for qi in range(nq):
        qx = query[qi, 0]
        qy = query[qi, 1]
        qz = query[qi, 2]
        cx = int(np.floor((qx - origin[0]) / cell))
        cy = int(np.floor((qy - origin[1]) / cell))
        cz = int(np.floor((qz - origin[2]) / cell))
        fx = max(abs(-cx), abs(nx - 1 - cx))
        fy = max(abs(-cy), abs(ny - 1 - cy))
        fz = max(abs(-cz), abs(nz - 1 - cz))
        r_last = max(fx, max(fy, fz))
        count = 0
        for ring in range(r_last + 1):
            for dx in range(-ring, ring + 1):
                gx = cx + dx
                if gx < 0 or gx >= nx:
                    continue
                for dy in range(-ring, ring + 1):
                    gy = cy + dy
                    if gy < 0 or gy >= ny:
                        continue
                    for dz in range(-ring, ring + 1):
                        if max(abs(dx), max(abs(dy), abs(dz))) != ring:
                            continue
                        gz = cz + dz
                        if gz < 0 or gz >= nz:
                            continue
                        lin = (gx * ny + gy) * nz + gz
                        for oi in range(cell_start[lin], cell_start[lin + 1]):
                            j = order[oi]
                            tx = qx - ref[j, 0]
                            ty = qy - ref[j, 1]
                            tz = qz - ref[j, 2]
                            d2 = tx * tx + ty * ty + tz * tz
                            count = _kbest_insert(bd, bi, count, d2, j)
            if count >= k:
                bound = ring * cell
                if bd[k - 1] < bound * bound:
                    break
        for c in range(k):
            idx[qi, c] = bi[c]
            dist[qi, c] = bd[c]
    return idx, dist


@njit(cache=True)
def fps(points, m, start):
    n = points.shape[0]
    out = np.empty(m, dtype=np.int64)
    out[0] = start
    d2 = np.empty(n, dtype=np.float64)
    for j in range(n):
        tx = points[j, 0] - points[start, 0]
        ty = points[j, 1] - points[start, 1]
        tz = points[j, 2] - points[start, 2]
        d2[j] = tx * tx + ty * ty + tz * tz
    for i in range(1, m):
        best = 0
        bestv = d2[0]
        for j in range(1, n):
            if d2[j] > bestv:
                bestv = d2[j]
                best = j
        out[i] = best
        for j in range(n):
            tx = points[j, 0] - points[best, 0]
            ty = points[j, 1] - points[best, 1]
            tz = points[j, 2] - points[best, 2]
            nd = tx * tx + ty * ty + tz * tz
            if nd < d2[j]:
                d2[j] = nd
    return out


@njit(cache=True)
def ball_query_grid(points, center_idx, radius, max_samples,
                    origin, cell, dims, cell_start, order):
    """Grid ball query with cell size >= radius: 27 cells cover the ball."""
    m = center_idx.shape[0]
    out = np.empty((m, max_samples), dtype=np.int64)
    bd = np.empty(max_samples, dtype=np.float64)
    bi = np.empty(max_samples, dtype=np.int64)
    r2 = radius * radius
    nx, ny, nz = dims[0], dims[1], dims[2]
    for i in range(m):
        c = center_idx[i]
        px = points[c, 0]
        py = points[c, 1]
        pz = points[c, 2]
        cx = int(np.floor((px - origin[0]) / cell))
        cy = int(np.floor((py - origin[1]) / cell))
        cz = int(np.floor((pz - origin[2]) / cell))
        count = 0
        for dx in range(-1, 2):
            gx = cx + dx
            if gx < 0 or gx >= nx:
                continue
            for dy in range(-1, 2):
                gy = cy + dy
                if gy < 0 or gy >= ny:
                    continue
                for dz in range(-1, 2):
                    gz = cz + dz
                    if gz < 0 or gz >= nz:
                        continue
                    lin = (gx * ny + gy) * nz + gz
                    for oi in range(cell_start[lin], cell_start[lin + 1]):
                        j = order[oi]
                        tx = px - points[j, 0]
                        ty = py - points[j, 1]
                        tz = pz - points[j, 2]
                        d2 = tx * tx + ty * ty + tz * tz
                        if d2 <= r2:
                            count = _kbest_insert(bd, bi, count, d2, j)
        for s in range(max_samples):
            out[i, s] = bi[s] if s < count else c
    return out


@njit(cache=True)
def ball_query_brute(points, center_idx, radius, max_samples):
    m = center_idx.shape[0]
    n = points.shape[0]
    out = np.empty((m, max_samples), dtype=np.int64)
    bd = np.empty(max_samples, dtype=np.float64)
    bi = np.empty(max_samples, dtype=np.int64)
    r2 = radius * radius
    for i in range(m):
        c = center_idx[i]
        count = 0
        for j in range(n):
            tx = points[c, 0] - points[j, 0]
            ty = points[c, 1] - points[j, 1]
            tz = points[c, 2] - points[j, 2]
            d2 = tx * tx + ty * ty + tz * tz
            if d2 <= r2:
                count = _kbest_insert(bd, bi, count, d2, j)
        for s in range(max_samples):
            out[i, s] = bi[s] if s < count else c
    return out


# --- ray casting --------------------------------------------------------

@njit(cache=True)
def _cylinder_roots(ox, oy, oz, dx, dy, dz, ax, ay, az, bx, by, bz, radius):
    ux = bx - ax
    uy = by - ay
    uz = bz - az
    ell = np.sqrt(ux * ux + uy * uy + uz * uz)
    uhx = ux / ell
    uhy = uy / ell
    uhz = uz / ell
    wx = ox - ax
    wy = oy - ay
    wz = oz - az
    du = dx * uhx + dy * uhy + dz * uhz
    wu = wx * uhx + wy * uhy + wz * uhz
    acoef = 1.0 - du * du
    wd = (wx * dx + wy * dy + wz * dz) - du * wu
    bcoef = 2.0 * wd
    ccoef = (wx * wx + wy * wy + wz * wz) - wu * wu - radius * radius
    if acoef <= 1e-14:
        return np.inf, np.inf, 0.0, 0.0, ell
    disc = bcoef * bcoef - 4.0 * acoef * ccoef
    if disc < 0.0:
        return np.inf, np.inf, 0.0, 0.0, ell
    sq = np.sqrt(disc)
    t1 = (-bcoef - sq) / (2.0 * acoef)
    t2 = (-bcoef + sq) / (2.0 * acoef)
    s1 = wu + t1 * du
    s2 = wu + t2 * du
    return t1, t2, s1, s2, ell


@njit(cache=True)
def _sphere_first_t(ox, oy, oz, dx, dy, dz, cx, cy, cz, radius):
    wx = ox - cx
    wy = oy - cy
    wz = oz - cz
    bcoef = 2.0 * (wx * dx + wy * dy + wz * dz)
    ccoef = (wx * wx + wy * wy + wz * wz) - radius * radius
    disc = bcoef * bcoef - 4.0 * ccoef
    if disc < 0.0:
        return np.inf
    sq = np.sqrt(disc)
    t1 = (-bcoef - sq) / 2.0
    if t1 > T_MIN:
        return t1
    t2 = (-bcoef + sq) / 2.0
    if t2 > T_MIN:
        return t2
    return np.inf


@njit(cache=True)
def _prim_first_t(kp, ox, oy, oz, dx, dy, dz,
                  ax, ay, az, bx, by, bz, r0, r1):
    if kp == 0:  # capsule: cylinder side clipped to the segment + both caps
        t1, t2, s1, s2, ell = _cylinder_roots(
            ox, oy, oz, dx, dy, dz, ax, ay, az, bx, by, bz, r0)
        t = np.inf
        if t1 != np.inf:
            if t1 > T_MIN and 0.0 <= s1 <= ell:
                t = t1
            elif t2 > T_MIN and 0.0 <= s2 <= ell:
                t = t2
        ta = _sphere_first_t(ox, oy, oz, dx, dy, dz, ax, ay, az, r0)
        if ta < t:
            t = ta
        tb = _sphere_first_t(ox, oy, oz, dx, dy, dz, bx, by, bz, r0)
        if tb < t:
            t = tb
        return t
    if kp == 1:  # tube wall: cylinder restricted to the covered span
        t1, t2, s1, s2, ell = _cylinder_roots(
            ox, oy, oz, dx, dy, dz, ax, ay, az, bx, by, bz, r0)
        if t1 == np.inf:
            return np.inf
        if t1 > T_MIN and 0.0 <= s1 <= ell:
            return t1
        if t2 > T_MIN and 0.0 <= s2 <= ell:
            return t2
        return np.inf
    if kp == 2:  # annular ring face; (b) holds the unit plane normal
        dn = dx * bx + dy * by + dz * bz
        if abs(dn) <= 1e-12:
            return np.inf
        t = ((ax - ox) * bx + (ay - oy) * by + (az - oz) * bz) / dn
        if t <= T_MIN:
            return np.inf
        hx = ox + t * dx - ax
        hy = oy + t * dy - ay
        hz = oz + t * dz - az
        rad2 = hx * hx + hy * hy + hz * hz
        if rad2 < r0 * r0 or rad2 > r1 * r1:
            return np.inf
        return t
    # kp == 3: dome cap, hemisphere on the outward-axis side
    wx = ox - ax
    wy = oy - ay
    wz = oz - az
    bcoef = 2.0 * (wx * dx + wy * dy + wz * dz)
    ccoef = (wx * wx + wy * wy + wz * wz) - r0 * r0
    disc = bcoef * bcoef - 4.0 * ccoef
    if disc < 0.0:
        return np.inf
    sq = np.sqrt(disc)
    t1 = (-bcoef - sq) / 2.0
    if t1 > T_MIN:
        h = ((ox + t1 * dx - ax) * bx + (oy + t1 * dy - ay) * by
             + (oz + t1 * dz - az) * bz)
        if h >= -1e-12:
            return t1
    t2 = (-bcoef + sq) / 2.0
    if t2 > T_MIN:
        h = ((ox + t2 * dx - ax) * bx + (oy + t2 * dy - ay) * by
             + (oz + t2 * dz - az) * bz)
        if h >= -1e-12:
            return t2
    return np.inf


@njit(cache=True)
def raycast(origins, dirs, kind, pa, pb, r0, r1):
    n = origins.shape[0]
    nprim = kind.shape[0]
    best_t = np.full(n, np.inf)
    best_p = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        ox = origins[i, 0]
        oy = origins[i, 1]
        oz = origins[i, 2]
        dx = dirs[i, 0]
        dy = dirs[i, 1]
        dz = dirs[i, 2]
        bt = np.inf
        bp = -1
        for p in range(nprim):
            t = _prim_first_t(kind[p], ox, oy, oz, dx, dy, dz,
                              pa[p, 0], pa[p, 1], pa[p, 2],
                              pb[p, 0], pb[p, 1], pb[p, 2],
                              r0[p], r1[p])
            if t < bt:
                bt = t
                bp = p
        best_t[i] = bt
        best_p[i] = bp
    return best_t, best_p
