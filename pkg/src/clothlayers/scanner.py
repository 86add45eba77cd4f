"""Virtual multi-view structured-light scanner.

Each view shoots a stratified orthographic ray grid at the scene; the first
ray-surface intersection becomes a point. Labels and normals are computed at
the clean hit, then depth noise (Gaussian along the ray, clipped to three
sigmas so visibility certificates stay exact) perturbs the stored position.
Views are cast in index order and concatenated, so scans are deterministic
in (scene, config).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels, geometry
from .errors import EmptyScanError, InvalidArgumentError
from .geometry import PointCloud
from .layering import CanonicalLabels
from .scene import Scene

_MIN_UP_ANGLE_DEG = 30.0  # keep cameras away from the under-the-feet pole


def default_view_directions(num_views: int) -> np.ndarray:
    """Two staggered elevation rings plus one top-down view.

    For the default 13 views: six directions at +25 degrees elevation, six at
    -10 degrees (azimuths offset half a step), and one from straight above.
    """
    if num_views < 1:
        raise InvalidArgumentError("num_views must be positive")
    if num_views == 1:
        return np.array([[1.0, 0.0, 0.0]])
    n_ring = num_views - 1
    n_hi = (n_ring + 1) // 2
    n_lo = n_ring - n_hi
    dirs = []
    for count, elev_deg, az0 in ((n_hi, 25.0, 0.0), (n_lo, -10.0, None)):
        if count == 0:
            continue
        elev = np.deg2rad(elev_deg)
        step = 2.0 * np.pi / count
        start = step / 2.0 if az0 is None else az0
        for i in range(count):
            az = start + i * step
            dirs.append([np.cos(elev) * np.cos(az),
                         np.cos(elev) * np.sin(az),
                         np.sin(elev)])
    dirs.append([0.0, 0.0, 1.0])
    return np.asarray(dirs, dtype=np.float64)


@dataclass(frozen=True)
class ScanConfig:
    """Scanner parameters; ``view_directions`` default to the 13-view rig."""

    num_views: int = 13
    rays_per_view: int = 1500
    noise_sigma: float = 0.002
    seed: int = 0
    view_directions: np.ndarray | None = None

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise InvalidArgumentError("noise_sigma must be >= 0")
        if self.rays_per_view < 1:
            raise InvalidArgumentError("rays_per_view must be >= 1")
        dirs = self.view_directions
        if dirs is None:
            dirs = default_view_directions(self.num_views)
        else:
            dirs = np.asarray(dirs, dtype=np.float64)
            dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
            if len(dirs) != self.num_views:
                raise InvalidArgumentError(
                    "view_directions length must equal num_views")
        min_z = -np.cos(np.deg2rad(_MIN_UP_ANGLE_DEG))
        if (dirs[:, 2] < min_z - 1e-12).any():
            raise InvalidArgumentError(
                f"view directions must stay {_MIN_UP_ANGLE_DEG:.0f} degrees "
                "away from the under-the-feet pole")
        object.__setattr__(self, "view_directions", dirs)

    def to_json(self) -> str:
        return json.dumps({
            "num_views": self.num_views,
            "rays_per_view": self.rays_per_view,
            "noise_sigma": self.noise_sigma,
            "seed": self.seed,
            "view_directions": np.asarray(self.view_directions).tolist(),
        }, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ScanConfig":
        raw = json.loads(text)
        return ScanConfig(
            num_views=int(raw["num_views"]),
            rays_per_view=int(raw["rays_per_view"]),
            noise_sigma=float(raw["noise_sigma"]),
            seed=int(raw["seed"]),
            view_directions=np.asarray(raw["view_directions"], dtype=np.float64))


@dataclass(frozen=True)
class LabeledScan:
    """Scan points with exact per-point canonical labels."""

    cloud: PointCloud
    labels: CanonicalLabels
    config: ScanConfig

    def __post_init__(self):
        if len(self.labels) != len(self.cloud):
            raise InvalidArgumentError("labels must cover every point")

    def __len__(self) -> int:
        return len(self.cloud)

    def take(self, idx: np.ndarray) -> "LabeledScan":
        idx = np.asarray(idx, dtype=np.int64)
        sv = self.cloud.source_view
        return LabeledScan(
            cloud=PointCloud(self.cloud.positions[idx],
                             self.cloud.normals[idx],
                             None if sv is None else sv[idx]),
            labels=CanonicalLabels(self.labels.is_body[idx],
                                   self.labels.visible[idx],
                                   self.labels.hidden[idx]),
            config=self.config)


def _view_basis(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = np.array([0.0, 0.0, 1.0]) if abs(d[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(ref, d)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    return e1, e2


def _scene_frame(scene: Scene) -> tuple[np.ndarray, float]:
    lo, hi = scene.bounds()
    center = 0.5 * (lo + hi)
    radius = 0.5 * float(np.linalg.norm(hi - lo))
    return center, radius


def scan(scene: Scene, config: ScanConfig) -> LabeledScan:
    """Multi-view scan with exact labels at the unperturbed hits."""
    lo, hi = scene.bounds()
    center, radius = _scene_frame(scene)
    back = 2.0 * radius + 0.5
    corners = np.array([[x, y, z] for x in (lo[0], hi[0])
                        for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    prims = scene.prim_arrays()
    grid = int(np.ceil(np.sqrt(config.rays_per_view)))

    all_pos, all_nrm, all_view = [], [], []
    all_body, all_vis, all_hid = [], [], []
    for v, vdir in enumerate(config.view_directions):
        rng = np.random.default_rng([config.seed, 101, v])
        d = -vdir
        e1, e2 = _view_basis(d)
        # stratify over the projected bounding box of this view
        pu = (corners - center) @ e1
        pw = (corners - center) @ e2
        margin = 0.01 * radius
        u0, u1 = pu.min() - margin, pu.max() + margin
        w0, w1 = pw.min() - margin, pw.max() + margin
        cells = np.arange(config.rays_per_view)
        jitter = rng.random((config.rays_per_view, 2))
        u = u0 + (cells // grid + jitter[:, 0]) / grid * (u1 - u0)
        w = w0 + (cells % grid + jitter[:, 1]) / grid * (w1 - w0)
        origins = (center + vdir * back
                   + u[:, None] * e1 + w[:, None] * e2)
        dirs = np.broadcast_to(d, origins.shape).copy()
        t, prim = _kernels.raycast(origins, dirs, *prims)
        hit = prim >= 0
        if not hit.any():
            continue
        pts = origins[hit] + t[hit, None] * d
        labels = scene.label_points(pts, prim[hit])
        normals = scene.hit_normals(pts, prim[hit], d)
        if config.noise_sigma > 0:
            eta = rng.normal(0.0, config.noise_sigma, int(hit.sum()))
            eta = np.clip(eta, -3.0 * config.noise_sigma,
                          3.0 * config.noise_sigma)
            pts = pts + eta[:, None] * d
        all_pos.append(pts)
        all_nrm.append(normals)
        all_view.append(np.full(int(hit.sum()), v, dtype=np.int64))
        all_body.append(labels.is_body)
        all_vis.append(labels.visible)
        all_hid.append(labels.hidden)
    if not all_pos:
        raise EmptyScanError("no ray hit a surface from any viewpoint")
    cloud = PointCloud(np.concatenate(all_pos), np.concatenate(all_nrm),
                       np.concatenate(all_view))
    labels = CanonicalLabels(np.concatenate(all_body),
                             np.concatenate(all_vis),
                             np.concatenate(all_hid))
    return LabeledScan(cloud=cloud, labels=labels, config=config)


def resample(scan_: LabeledScan, target_points: int, seed: int) -> LabeledScan:
    """Resize a scan: farthest-point subset when shrinking, replicated points
    with bounded jitter when growing."""
    if target_points < 1:
        raise InvalidArgumentError("target_points must be >= 1")
    n = len(scan_)
    if target_points == n:
        return scan_
    if target_points < n:
        idx = geometry.farthest_point_sample(scan_.cloud, target_points, seed)
        return scan_.take(idx)
    rng = np.random.default_rng([seed, 7])
    extra = rng.integers(0, n, size=target_points - n)
    out = scan_.take(np.concatenate([np.arange(n), extra]))
    sigma = scan_.config.noise_sigma
    if sigma > 0:
        m = len(extra)
        vec = rng.normal(size=(m, 3))
        vec /= np.linalg.norm(vec, axis=1, keepdims=True)
        mag = sigma * rng.random(m) ** (1.0 / 3.0)
        pos = out.cloud.positions.copy()
        pos[n:] += vec * mag[:, None]
        out = LabeledScan(
            cloud=PointCloud(pos, out.cloud.normals, out.cloud.source_view),
            labels=out.labels, config=out.config)
    return out


def check_visibility(scan_: LabeledScan, scene: Scene,
                     eps: float = 1e-6) -> int:
    """Count points with a strictly closer intersection along their own ray.

    A point is a violation when something blocks its acquisition ray more
    than three noise sigmas (plus eps) in front of it. Scans produced by
    ``scan`` report zero.
    """
    if len(scan_) == 0:
        return 0
    if scan_.cloud.source_view is None:
        raise InvalidArgumentError("scan has no per-point source views")
    _, radius = _scene_frame(scene)
    back = 2.0 * radius + 1.0
    prims = scene.prim_arrays()
    sigma = scan_.config.noise_sigma
    allowance = 3.0 * sigma + eps
    violations = 0
    views = scan_.cloud.source_view
    for v in np.unique(views):
        m = views == v
        d = -scan_.config.view_directions[v]
        origins = scan_.cloud.positions[m] - back * d
        dirs = np.broadcast_to(d, origins.shape).copy()
        t, prim = _kernels.raycast(origins, dirs, *prims)
        violations += int(((prim >= 0) & (t < back - allowance)).sum())
    return violations
