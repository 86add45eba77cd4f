"""Point-set containers and exact spatial kernels.

All operations are pure functions over immutable inputs and deterministic:
ties are broken by lower index everywhere, so results are reproducible and
safe to compare across the numba and numpy kernel backends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidArgumentError

_UNIT_TOL = 1e-6


@dataclass(frozen=True)
class PointCloud:
    """Positions (N,3) in meters plus unit normals (N,3).

    ``source_view`` optionally records the scanner viewpoint each point came
    from.
    """

    positions: np.ndarray
    normals: np.ndarray
    source_view: np.ndarray | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        nrm = np.asarray(self.normals, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or len(pos) < 1:
            raise InvalidArgumentError("positions must be a nonempty (N,3) array")
        if nrm.shape != pos.shape:
            raise InvalidArgumentError("normals must match positions shape")
        if not np.isfinite(pos).all():
            raise InvalidArgumentError("positions contain non-finite values")
        lens = np.linalg.norm(nrm, axis=1)
        if not np.all(np.abs(lens - 1.0) <= _UNIT_TOL):
            bad = int(np.argmax(np.abs(lens - 1.0)))
            raise InvalidArgumentError(
                f"normals must be unit length within {_UNIT_TOL}; "
                f"point {bad} has |n| = {lens[bad]:.8f}")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "normals", nrm)
        if self.source_view is not None:
            sv = np.asarray(self.source_view, dtype=np.int64)
            if sv.shape != (len(pos),):
                raise InvalidArgumentError("source_view must be (N,)")
            object.__setattr__(self, "source_view", sv)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class NeighborList:
    """Per-query neighbor indices (N,k) with nondecreasing distances (N,k)."""

    indices: np.ndarray
    distances: np.ndarray


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, PointCloud):
        return data.positions
    m = np.asarray(data, dtype=np.float64)
    if m.ndim != 2:
        raise InvalidArgumentError("expected a PointCloud or an (N,D) matrix")
    return m


def knn(query, reference, k: int) -> NeighborList:
    """Exact k nearest neighbors of each query row among the reference rows.

    Equal distances resolve to the lower reference index; a query that also
    appears in the reference therefore finds itself first.
    """
    q = _as_matrix(query)
    r = _as_matrix(reference)
    if k < 1:
        raise InvalidArgumentError("k must be positive")
    if k > len(r):
        raise InvalidArgumentError(f"k = {k} exceeds reference size {len(r)}")
    if q.shape[1] != r.shape[1]:
        raise InvalidArgumentError("query and reference dimensions differ")
    idx, d2 = _kernels.knn(q, r, k)
    return NeighborList(indices=idx, distances=np.sqrt(d2))


def farthest_point_sample(cloud, m: int, seed: int) -> np.ndarray:
    """Greedy farthest point subset of size m.

    The first index is ``seed % N``; every following pick maximizes the
    minimum distance to the already-selected set, ties to the lower index.
    """
    p = _as_matrix(cloud)
    n = len(p)
    if m < 1:
        raise InvalidArgumentError("m must be positive")
    if m > n:
        raise InvalidArgumentError(f"m = {m} exceeds point count {n}")
    return _kernels.fps(p, m, int(seed) % n)


def ball_query(centers, cloud, radius: float, max_samples: int) -> np.ndarray:
    """Fixed-radius neighborhoods around the given center indices.

    Each group holds the up to ``max_samples`` nearest points within
    ``radius`` (inclusive), nearest first; short groups are padded by
    repeating the center index so the output is a dense (M, max_samples)
    index array.
    """
    p = _as_matrix(cloud)
    if radius <= 0:
        raise InvalidArgumentError("radius must be positive")
    if max_samples < 1:
        raise InvalidArgumentError("max_samples must be positive")
    ci = np.asarray(centers, dtype=np.int64)
    if ci.ndim != 1:
        raise InvalidArgumentError("centers must be a 1-D index list")
    if len(ci) and (ci.min() < 0 or ci.max() >= len(p)):
        raise InvalidArgumentError("center index out of range")
    return _kernels.ball_query(p, ci, float(radius), int(max_samples))


def transform(cloud: PointCloud, rotation: np.ndarray, scale: float,
              translation: np.ndarray) -> PointCloud:
    """Similarity transform: positions -> scale*R*p + t, normals -> R*n.

    Labels associated with the cloud elsewhere are untouched by design.
    """
    rot = np.asarray(rotation, dtype=np.float64)
    if rot.shape != (3, 3):
        raise InvalidArgumentError("rotation must be 3x3")
    if np.abs(rot @ rot.T - np.eye(3)).max() > _UNIT_TOL:
        raise InvalidArgumentError("rotation must be orthonormal within 1e-6")
    if scale <= 0:
        raise InvalidArgumentError("scale must be positive")
    t = np.asarray(translation, dtype=np.float64).reshape(3)
    pos = scale * (cloud.positions @ rot.T) + t
    nrm = cloud.normals @ rot.T
    nrm = nrm / np.linalg.norm(nrm, axis=1, keepdims=True)
    return PointCloud(positions=pos, normals=nrm, source_view=cloud.source_view)


def random_rotation_z(rng: np.random.Generator) -> np.ndarray:
    """Uniform rotation about the vertical axis (augmentation helper)."""
    a = rng.uniform(0.0, 2.0 * np.pi)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
