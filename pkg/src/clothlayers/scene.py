"""Parametric clothed mannequins with exact, analytic layer labels.

The body is a capsule skeleton kept vertical at the trunk with posed limbs.
Garments are thin shells offset from the body surface, assembled from four
analytic primitives (capsule, tube wall, annular ring, dome cap) so that ray
casting and labeling are exact:

  * an upper garment is a trunk tube sealed at the neck, open at the hem,
    plus optional sleeve tubes;
  * trousers/shorts are a waist tube sealed on top plus per-leg tubes;
  * a skirt is a slim waistband plus a wide flare tube and a shelf ring,
    so the upper garment can still close over its waistband.

A point's hidden garment is decided by projecting it onto the body skeleton:
if the nearest skeleton point falls inside the lower garment's covered
intervals and the point sits on the upper garment, the lower class is hidden
beneath it. The body layer marks skin plus any shell whose offset does not
exceed ``tight_threshold``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import nearest_segment
from .errors import InvalidArgumentError, OutOfDomainError, SceneGenerationError
from .layering import (NONE_CLASS, CanonicalLabel, CanonicalLabels,
                       GarmentClass, parse_garment)

DEFAULT_TIGHT_THRESHOLD = 0.008  # shells this close to the skin count as body

KIND_CAPSULE, KIND_TUBE, KIND_RING, KIND_DOME = 0, 1, 2, 3
SOLID_BODY, SOLID_UPPER, SOLID_LOWER = 0, 1, 2

_COVERAGE_EPS = 1e-9


@dataclass(frozen=True)
class Capsule:
    name: str
    a: np.ndarray
    b: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=np.float64))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.float64))
        if self.radius <= 0:
            raise InvalidArgumentError(f"capsule {self.name} radius must be > 0")


@dataclass(frozen=True)
class BodyModel:
    """Posed capsule mannequin plus the parameters that produced it."""

    capsules: tuple[Capsule, ...]
    pose: dict[str, float]
    shape: dict[str, float]

    def seg_arrays(self):
        a = np.stack([c.a for c in self.capsules])
        b = np.stack([c.b for c in self.capsules])
        r = np.array([c.radius for c in self.capsules])
        return a, b, r

    def seg_index(self, name: str) -> int:
        for i, c in enumerate(self.capsules):
            if c.name == name:
                return i
        raise KeyError(name)

    @property
    def crotch_z(self) -> float:
        return float(self.capsules[0].a[2])

    @property
    def trunk_top_z(self) -> float:
        return float(self.capsules[0].b[2])

    @property
    def trunk_radius(self) -> float:
        return float(self.capsules[0].radius)


@dataclass(frozen=True)
class GarmentShell:
    """One garment: class, offset from the skin, fabric thickness, coverage.

    Coverage keys by family:
      upper: upper_arm_fraction, forearm_fraction
      trousers/shorts: waist_rise (trunk fraction), thigh_fraction, shin_fraction
      skirt: waist_rise, leg_drop (fraction of the leg chain), flare (extra
      radial clearance of the flare tube)
    """

    garment_class: GarmentClass
    offset: float
    thickness: float
    coverage: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.offset < 0:
            raise InvalidArgumentError("shell offset must be >= 0")
        if self.thickness < 0:
            raise InvalidArgumentError("shell thickness must be >= 0")


@dataclass(frozen=True)
class Outfit:
    """Exactly one upper and one lower shell plus the hem/waistband overlap.

    ``overlap_band`` is the signed vertical extent (meters) by which the
    upper hem reaches below the lower waistband; non-positive values leave a
    gap (bare midriff).
    """

    upper: GarmentShell
    lower: GarmentShell
    overlap_band: float

    def __post_init__(self):
        if not self.upper.garment_class.is_upper:
            raise InvalidArgumentError(
                f"{self.upper.garment_class.label} is not an upper garment")
        if not self.lower.garment_class.is_lower:
            raise InvalidArgumentError(
                f"{self.lower.garment_class.label} is not a lower garment")


@dataclass(frozen=True)
class SceneSpec:
    """On-disk scene description (JSON): classes, overlap band, two seeds."""

    upper: str
    lower: str
    overlap_band_m: float
    pose_seed: int
    shape_seed: int

    def to_json(self) -> str:
        return json.dumps({
            "outfit": {"upper": self.upper, "lower": self.lower},
            "overlap_band_m": self.overlap_band_m,
            "pose_seed": self.pose_seed,
            "shape_seed": self.shape_seed,
        }, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "SceneSpec":
        raw = json.loads(text)
        try:
            return SceneSpec(
                upper=raw["outfit"]["upper"], lower=raw["outfit"]["lower"],
                overlap_band_m=float(raw["overlap_band_m"]),
                pose_seed=int(raw["pose_seed"]),
                shape_seed=int(raw["shape_seed"]))
        except KeyError as exc:
            raise InvalidArgumentError(f"scene spec missing field {exc}") from None


@dataclass(frozen=True)
class SceneMeta:
    retries: int = 0
    pose_seed: int | None = None
    shape_seed: int | None = None


@dataclass(frozen=True)
class Scene:
    """Compiled analytic scene: primitive arrays plus labeling tables."""

    body: BodyModel
    outfit: Outfit
    kind: np.ndarray
    pa: np.ndarray
    pb: np.ndarray
    r0: np.ndarray
    r1: np.ndarray
    prim_solid: np.ndarray
    prim_class: np.ndarray
    prim_offset: np.ndarray
    cov_seg: np.ndarray        # lower-garment coverage: body segment index
    cov_t0: np.ndarray         # and axial fraction interval
    cov_t1: np.ndarray
    tight_threshold: float
    meta: SceneMeta = field(default_factory=SceneMeta)

    def prim_arrays(self):
        return self.kind, self.pa, self.pb, self.r0, self.r1

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        reach = np.maximum(self.r0, self.r1)[:, None]
        is_seg = (self.kind == KIND_CAPSULE) | (self.kind == KIND_TUBE)
        ends = np.where(is_seg[:, None], self.pb, self.pa)
        lo = np.minimum(self.pa - reach, ends - reach).min(axis=0)
        hi = np.maximum(self.pa + reach, ends + reach).max(axis=0)
        return lo, hi

    def label_points(self, points: np.ndarray, prim_idx: np.ndarray) -> CanonicalLabels:
        """Exact layer labels for points lying on the given primitives."""
        pts = np.asarray(points, dtype=np.float64)
        pi = np.asarray(prim_idx, dtype=np.int64)
        solid = self.prim_solid[pi]
        cls = self.prim_class[pi]
        off = self.prim_offset[pi]
        visible = np.where(solid == SOLID_BODY, NONE_CLASS, cls).astype(np.int8)
        is_body = (solid == SOLID_BODY) | (
            (solid != SOLID_BODY) & (off <= self.tight_threshold + 1e-12))
        hidden = np.full(len(pts), NONE_CLASS, dtype=np.int8)
        on_upper = solid == SOLID_UPPER
        if on_upper.any() and len(self.cov_seg):
            seg_a, seg_b, seg_r = self.body.seg_arrays()
            seg, t, _ = nearest_segment(pts[on_upper], seg_a, seg_b, seg_r)
            covered = np.zeros(len(seg), dtype=bool)
            for ci in range(len(self.cov_seg)):
                covered |= ((seg == self.cov_seg[ci])
                            & (t >= self.cov_t0[ci] - _COVERAGE_EPS)
                            & (t <= self.cov_t1[ci] + _COVERAGE_EPS))
            h = hidden[on_upper]
            h[covered] = int(self.outfit.lower.garment_class)
            hidden[on_upper] = h
        return CanonicalLabels(is_body=is_body, visible=visible, hidden=hidden)

    def hit_normals(self, points: np.ndarray, prim_idx: np.ndarray,
                    ray_dirs: np.ndarray) -> np.ndarray:
        """Geometric surface normals at hit points, oriented against the rays."""
        pts = np.asarray(points, dtype=np.float64)
        pi = np.asarray(prim_idx, dtype=np.int64)
        n = np.zeros_like(pts)
        kinds = self.kind[pi]
        for kp in (KIND_CAPSULE, KIND_TUBE):
            m = kinds == kp
            if not m.any():
                continue
            a = self.pa[pi[m]]
            b = self.pb[pi[m]]
            u = b - a
            ell2 = (u * u).sum(-1, keepdims=True)
            s = ((pts[m] - a) * u).sum(-1, keepdims=True) / ell2
            if kp == KIND_CAPSULE:
                s = np.clip(s, 0.0, 1.0)
            foot = a + s * u
            n[m] = pts[m] - foot
        m = kinds == KIND_RING
        if m.any():
            n[m] = self.pb[pi[m]]
        m = kinds == KIND_DOME
        if m.any():
            n[m] = pts[m] - self.pa[pi[m]]
        n /= np.linalg.norm(n, axis=1, keepdims=True)
        flip = (n * ray_dirs).sum(-1) > 0
        n[flip] *= -1.0
        return n

    def surface_distance(self, point: np.ndarray) -> np.ndarray:
        """Distance from one point to every primitive's surface."""
        p = np.asarray(point, dtype=np.float64)
        out = np.empty(len(self.kind))
        for i in range(len(self.kind)):
            kp = int(self.kind[i])
            a, b = self.pa[i], self.pb[i]
            if kp == KIND_CAPSULE:
                u = b - a
                s = np.clip((p - a) @ u / (u @ u), 0.0, 1.0)
                out[i] = abs(np.linalg.norm(p - (a + s * u)) - self.r0[i])
            elif kp == KIND_TUBE:
                u = b - a
                ell = np.linalg.norm(u)
                uh = u / ell
                s = (p - a) @ uh
                rad = np.linalg.norm(p - a - s * uh)
                excess = max(0.0, -s, s - ell)
                out[i] = float(np.hypot(excess, rad - self.r0[i]))
            elif kp == KIND_RING:
                pd = (p - a) @ b
                rad = np.linalg.norm(p - a - pd * b)
                deficit = max(0.0, self.r0[i] - rad, rad - self.r1[i])
                out[i] = float(np.hypot(pd, deficit))
            else:
                w = p - a
                h = w @ b
                if h >= 0.0:
                    out[i] = abs(np.linalg.norm(w) - self.r0[i])
                else:
                    rad = np.linalg.norm(w - h * b)
                    out[i] = float(np.hypot(rad - self.r0[i], h))
        return out


def surface_label(scene: Scene, point, tolerance: float) -> CanonicalLabel:
    """Label a single point lying on the scene's outermost surface.

    The nearest primitive decides the visible layer (garment pieces are
    ordered before body capsules, so exact tangencies resolve to the garment).
    Points farther than ``tolerance`` from every surface are out of domain.
    Enclosed interior surfaces are not detected here; the scanner never
    produces such points.
    """
    d = scene.surface_distance(point)
    best = int(np.argmin(d))
    if d[best] > tolerance:
        raise OutOfDomainError(
            f"point is {d[best]:.4f} m from the nearest surface "
            f"(tolerance {tolerance:.4f})")
    labels = scene.label_points(np.asarray(point, dtype=np.float64)[None, :],
                                np.array([best]))
    return labels.at(0)


# --- body template and sampling -------------------------------------------

@dataclass(frozen=True)
class BodyTemplate:
    """Base mannequin dimensions plus pose/shape jitter ranges (radians/ratios)."""

    dims: dict[str, float]
    pose_ranges: dict[str, tuple[float, float]]
    shape_ranges: dict[str, tuple[float, float]]


def default_body_template() -> BodyTemplate:
    deg = np.pi / 180.0
    dims = {
        "crotch_z": 0.80, "trunk_top_z": 1.44, "trunk_r": 0.125,
        "head_lo_z": 1.52, "head_hi_z": 1.62, "head_r": 0.09,
        "shoulder_x": 0.15, "shoulder_z": 1.40,
        "upper_arm_len": 0.30, "upper_arm_r": 0.045,
        "forearm_len": 0.28, "forearm_r": 0.040,
        "hip_x": 0.075, "thigh_len": 0.40, "thigh_r": 0.072,
        "shin_len": 0.42, "shin_r": 0.050,
    }
    pose_ranges = {
        "arm_abduct_l": (16 * deg, 42 * deg),
        "arm_abduct_r": (16 * deg, 42 * deg),
        "arm_fwd_l": (-8 * deg, 8 * deg),
        "arm_fwd_r": (-8 * deg, 8 * deg),
        "elbow_out_l": (0.0, 16 * deg),
        "elbow_out_r": (0.0, 16 * deg),
        "elbow_fwd_l": (0.0, 18 * deg),
        "elbow_fwd_r": (0.0, 18 * deg),
        "leg_spread_l": (3 * deg, 12 * deg),
        "leg_spread_r": (3 * deg, 12 * deg),
        "knee_back_l": (0.0, 8 * deg),
        "knee_back_r": (0.0, 8 * deg),
    }
    shape_ranges = {
        "scale": (0.93, 1.07),
        "trunk_rm": (0.92, 1.08),
        "arm_rm": (0.90, 1.10),
        "leg_rm": (0.90, 1.10),
        "head_rm": (0.95, 1.05),
    }
    return BodyTemplate(dims=dims, pose_ranges=pose_ranges,
                        shape_ranges=shape_ranges)


def _draw(ranges: dict[str, tuple[float, float]],
          rng: np.random.Generator) -> dict[str, float]:
    return {k: float(rng.uniform(*ranges[k])) for k in sorted(ranges)}


def pose_body(template: BodyTemplate, pose: dict[str, float],
              shape: dict[str, float]) -> BodyModel:
    d = template.dims
    g = shape["scale"]

    def vec(x, y, z):
        return np.array([x, y, z], dtype=np.float64)

    caps = [
        Capsule("trunk", vec(0, 0, d["crotch_z"] * g),
                vec(0, 0, d["trunk_top_z"] * g),
                d["trunk_r"] * g * shape["trunk_rm"]),
        Capsule("head", vec(0, 0, d["head_lo_z"] * g),
                vec(0, 0, d["head_hi_z"] * g),
                d["head_r"] * g * shape["head_rm"]),
    ]
    for side, tag in ((-1.0, "l"), (1.0, "r")):
        th = pose[f"arm_abduct_{tag}"]
        fw = pose[f"arm_fwd_{tag}"]
        shoulder = vec(side * d["shoulder_x"] * g, 0, d["shoulder_z"] * g)
        v1 = vec(side * np.sin(th), np.sin(fw), -np.cos(th))
        v1 /= np.linalg.norm(v1)
        elbow = shoulder + d["upper_arm_len"] * g * v1
        th2 = th + pose[f"elbow_out_{tag}"]
        fw2 = fw + pose[f"elbow_fwd_{tag}"]
        v2 = vec(side * np.sin(th2), np.sin(fw2), -np.cos(th2))
        v2 /= np.linalg.norm(v2)
        wrist = elbow + d["forearm_len"] * g * v2
        caps.append(Capsule(f"upper_arm_{tag}", shoulder, elbow,
                            d["upper_arm_r"] * g * shape["arm_rm"]))
        caps.append(Capsule(f"forearm_{tag}", elbow, wrist,
                            d["forearm_r"] * g * shape["arm_rm"]))
    for side, tag in ((-1.0, "l"), (1.0, "r")):
        ps = pose[f"leg_spread_{tag}"]
        kb = pose[f"knee_back_{tag}"]
        hip = vec(side * d["hip_x"] * g, 0, d["crotch_z"] * g)
        v1 = vec(side * np.sin(ps), 0, -np.cos(ps))
        v1 /= np.linalg.norm(v1)
        knee = hip + d["thigh_len"] * g * v1
        v2 = vec(side * np.sin(0.7 * ps), -np.sin(kb), -np.cos(0.7 * ps))
        v2 /= np.linalg.norm(v2)
        ankle = knee + d["shin_len"] * g * v2
        caps.append(Capsule(f"thigh_{tag}", hip, knee,
                            d["thigh_r"] * g * shape["leg_rm"]))
        caps.append(Capsule(f"shin_{tag}", knee, ankle,
                            d["shin_r"] * g * shape["leg_rm"]))
    order = ["trunk", "head", "upper_arm_l", "upper_arm_r", "forearm_l",
             "forearm_r", "thigh_l", "thigh_r", "shin_l", "shin_r"]
    by_name = {c.name: c for c in caps}
    return BodyModel(capsules=tuple(by_name[n] for n in order),
                     pose=dict(pose), shape=dict(shape))


# --- garment shell sampling ------------------------------------------------

_OFFSET_RANGES = {
    GarmentClass.LONG_SHIRT: (0.016, 0.024),
    GarmentClass.T_SHIRT: (0.013, 0.019),
    GarmentClass.TOP: (0.006, 0.008),
    GarmentClass.LONG_PANTS: (0.010, 0.013),
    GarmentClass.SHORTS: (0.010, 0.013),
    GarmentClass.SKIRT: (0.010, 0.013),  # waistband offset; the flare is wider
}


def sample_shell(cls: GarmentClass, rng: np.random.Generator) -> GarmentShell:
    """Class defaults with jitter. Draw order is fixed for reproducibility."""
    offset = float(rng.uniform(*_OFFSET_RANGES[cls]))
    thickness = float(rng.uniform(0.001, 0.003))
    cov: dict[str, float] = {}
    if cls is GarmentClass.LONG_SHIRT:
        cov["upper_arm_fraction"] = 1.0
        cov["forearm_fraction"] = float(rng.uniform(0.60, 0.90))
    elif cls is GarmentClass.T_SHIRT:
        cov["upper_arm_fraction"] = float(rng.uniform(0.35, 0.55))
        cov["forearm_fraction"] = 0.0
    elif cls is GarmentClass.TOP:
        cov["upper_arm_fraction"] = float(rng.uniform(0.0, 0.15))
        cov["forearm_fraction"] = 0.0
    elif cls is GarmentClass.LONG_PANTS:
        cov["waist_rise"] = float(rng.uniform(0.28, 0.36))
        cov["thigh_fraction"] = 1.0
        cov["shin_fraction"] = float(rng.uniform(0.70, 0.90))
    elif cls is GarmentClass.SHORTS:
        cov["waist_rise"] = float(rng.uniform(0.28, 0.36))
        cov["thigh_fraction"] = float(rng.uniform(0.35, 0.50))
        cov["shin_fraction"] = 0.0
    else:  # skirt
        cov["waist_rise"] = float(rng.uniform(0.28, 0.36))
        cov["leg_drop"] = float(rng.uniform(0.35, 0.75))
        cov["flare"] = float(rng.uniform(0.020, 0.045))
    return GarmentShell(garment_class=cls, offset=offset,
                        thickness=thickness, coverage=cov)


def sample_outfit(upper_cls: GarmentClass, lower_cls: GarmentClass,
                  overlap_band: float, rng: np.random.Generator) -> Outfit:
    """Sample both shells; with a positive band the upper is forced to sit
    radially outside the lower at the waist."""
    upper = sample_shell(upper_cls, rng)
    lower = sample_shell(lower_cls, rng)
    if overlap_band > 0:
        needed = lower.offset + lower.thickness + 0.004
        if upper.offset < needed:
            upper = replace(upper, offset=needed)
    return Outfit(upper=upper, lower=lower, overlap_band=overlap_band)


# --- scene assembly ---------------------------------------------------------

class _PrimBuilder:
    def __init__(self):
        self.rows: list[tuple] = []

    def add(self, kind, a, b, r0, r1, solid, cls, offset):
        self.rows.append((kind, np.asarray(a, float), np.asarray(b, float),
                          float(r0), float(r1), solid, cls, float(offset)))

    def tube_with_faces(self, a, b, r_in, r_out, solid, cls, offset,
                        cap_a=False, cap_b=False):
        """Thin-shell tube: outer wall, inner wall, open-end rings, domes.

        ``cap_a``/``cap_b`` seal the respective end with a dome; open ends get
        an annular fabric-edge ring when the shell has thickness.
        """
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        u = b - a
        uh = u / np.linalg.norm(u)
        self.add(KIND_TUBE, a, b, r_out, 0.0, solid, cls, offset)
        if r_out - r_in > 1e-9:
            self.add(KIND_TUBE, a, b, r_in, 0.0, solid, cls, offset)
            if not cap_a:
                self.add(KIND_RING, a, -uh, r_in, r_out, solid, cls, offset)
            if not cap_b:
                self.add(KIND_RING, b, uh, r_in, r_out, solid, cls, offset)
        if cap_a:
            self.add(KIND_DOME, a, -uh, r_out, 0.0, solid, cls, offset)
        if cap_b:
            self.add(KIND_DOME, b, uh, r_out, 0.0, solid, cls, offset)

    def arrays(self):
        kind = np.array([r[0] for r in self.rows], dtype=np.int64)
        pa = np.stack([r[1] for r in self.rows])
        pb = np.stack([r[2] for r in self.rows])
        r0 = np.array([r[3] for r in self.rows])
        r1 = np.array([r[4] for r in self.rows])
        solid = np.array([r[5] for r in self.rows], dtype=np.int8)
        cls = np.array([r[6] for r in self.rows], dtype=np.int8)
        off = np.array([r[7] for r in self.rows])
        return kind, pa, pb, r0, r1, solid, cls, off


def _axis_point(cap: Capsule, t: float) -> np.ndarray:
    return cap.a + t * (cap.b - cap.a)


def _leg_interval_above(cap: Capsule, z: float) -> tuple[float, float] | None:
    """Axial fraction interval of a downward segment lying at height >= z."""
    za, zb = float(cap.a[2]), float(cap.b[2])
    if za <= z:
        return None
    if zb >= z:
        return (0.0, 1.0)
    return (0.0, (za - z) / (za - zb))


def _build_upper(pb: _PrimBuilder, body: BodyModel, shell: GarmentShell,
                 hem_z: float) -> None:
    trunk = body.capsules[0]
    cls = int(shell.garment_class)
    r_in = trunk.radius + shell.offset
    r_out = r_in + shell.thickness
    a = np.array([0.0, 0.0, hem_z])
    b = trunk.b.copy()
    pb.tube_with_faces(a, b, r_in, r_out, SOLID_UPPER, cls, shell.offset,
                       cap_a=False, cap_b=True)
    ua = shell.coverage.get("upper_arm_fraction", 0.0)
    fa = shell.coverage.get("forearm_fraction", 0.0)
    for tag in ("l", "r"):
        arm = body.capsules[body.seg_index(f"upper_arm_{tag}")]
        fore = body.capsules[body.seg_index(f"forearm_{tag}")]
        if ua > 1e-6:
            end = _axis_point(arm, ua)
            pb.tube_with_faces(arm.a, end, arm.radius + shell.offset,
                               arm.radius + shell.offset + shell.thickness,
                               SOLID_UPPER, cls, shell.offset,
                               cap_a=True, cap_b=False)
        if fa > 1e-6:
            end = _axis_point(fore, fa)
            pb.tube_with_faces(fore.a, end, fore.radius + shell.offset,
                               fore.radius + shell.offset + shell.thickness,
                               SOLID_UPPER, cls, shell.offset,
                               cap_a=True, cap_b=False)


def _build_lower(pb: _PrimBuilder, body: BodyModel, shell: GarmentShell,
                 waist_z: float) -> tuple[list[tuple[int, float, float]], float]:
    """Emit lower-garment primitives; returns (coverage entries, hem z)."""
    trunk = body.capsules[0]
    cls = int(shell.garment_class)
    crotch = body.crotch_z
    t_waist = (waist_z - crotch) / (body.trunk_top_z - crotch)
    coverage: list[tuple[int, float, float]] = [(0, 0.0, t_waist)]

    if shell.garment_class is GarmentClass.SKIRT:
        waist_in = trunk.radius + shell.offset
        waist_out = waist_in + shell.thickness
        lateral = waist_in
        # hem height measured down the leg chain from the crotch
        chain_low = min(float(body.capsules[body.seg_index(f"shin_{t}")].b[2])
                        for t in ("l", "r"))
        hem_z = crotch - shell.coverage.get("leg_drop", 0.5) * (crotch - chain_low)
        for tag in ("l", "r"):
            for part in ("thigh", "shin"):
                cap = body.capsules[body.seg_index(f"{part}_{tag}")]
                iv = _leg_interval_above(cap, hem_z)
                if iv is None:
                    continue
                coverage.append((body.seg_index(f"{part}_{tag}"), iv[0], iv[1]))
                for t in iv:
                    p = _axis_point(cap, t)
                    lateral = max(lateral, float(np.hypot(p[0], p[1])) + cap.radius)
        flare_in = max(lateral + shell.coverage.get("flare", 0.03),
                       waist_out + 0.01)
        flare_out = flare_in + shell.thickness
        shelf_z = crotch + 0.01
        waist_a = np.array([0.0, 0.0, shelf_z])
        waist_b = np.array([0.0, 0.0, waist_z])
        pb.tube_with_faces(waist_a, waist_b, waist_in, waist_out,
                           SOLID_LOWER, cls, shell.offset,
                           cap_a=False, cap_b=True)
        # shelf ring joins the waistband to the flare (A-line transition)
        pb.add(KIND_RING, waist_a, np.array([0.0, 0.0, -1.0]),
               waist_in, flare_out, SOLID_LOWER, cls, shell.offset)
        flare_a = np.array([0.0, 0.0, hem_z])
        flare_b = np.array([0.0, 0.0, shelf_z])
        pb.tube_with_faces(flare_a, flare_b, flare_in, flare_out,
                           SOLID_LOWER, cls, shell.offset,
                           cap_a=False, cap_b=False)
        return coverage, hem_z

    # trousers / shorts: waist tube plus per-leg tubes
    waist_in = trunk.radius + shell.offset
    waist_out = waist_in + shell.thickness
    waist_a = np.array([0.0, 0.0, crotch])
    waist_b = np.array([0.0, 0.0, waist_z])
    pb.tube_with_faces(waist_a, waist_b, waist_in, waist_out,
                       SOLID_LOWER, cls, shell.offset,
                       cap_a=False, cap_b=True)
    hem_z = crotch
    tf = shell.coverage.get("thigh_fraction", 0.4)
    sf = shell.coverage.get("shin_fraction", 0.0)
    for tag in ("l", "r"):
        thigh = body.capsules[body.seg_index(f"thigh_{tag}")]
        if tf > 1e-6:
            end = _axis_point(thigh, tf)
            pb.tube_with_faces(thigh.a, end, thigh.radius + shell.offset,
                               thigh.radius + shell.offset + shell.thickness,
                               SOLID_LOWER, cls, shell.offset,
                               cap_a=True, cap_b=False)
            coverage.append((body.seg_index(f"thigh_{tag}"), 0.0, tf))
            hem_z = min(hem_z, float(end[2]))
        if sf > 1e-6:
            shin = body.capsules[body.seg_index(f"shin_{tag}")]
            end = _axis_point(shin, sf)
            pb.tube_with_faces(shin.a, end, shin.radius + shell.offset,
                               shin.radius + shell.offset + shell.thickness,
                               SOLID_LOWER, cls, shell.offset,
                               cap_a=True, cap_b=False)
            coverage.append((body.seg_index(f"shin_{tag}"), 0.0, sf))
            hem_z = min(hem_z, float(end[2]))
    return coverage, hem_z


def build_scene(outfit: Outfit, body: BodyModel,
                tight_threshold: float = DEFAULT_TIGHT_THRESHOLD,
                meta: SceneMeta | None = None) -> Scene:
    """Deterministically assemble the primitive set for a posed body + outfit."""
    crotch = body.crotch_z
    top = body.trunk_top_z
    waist_rise = outfit.lower.coverage.get("waist_rise", 0.31)
    waist_z = crotch + waist_rise * (top - crotch)
    hem_z = waist_z - outfit.overlap_band
    if hem_z < crotch + 0.005 or hem_z > top - 0.05:
        raise InvalidArgumentError(
            f"overlap band {outfit.overlap_band:+.3f} m puts the upper hem at "
            f"z = {hem_z:.3f}, outside ({crotch + 0.005:.3f}, {top - 0.05:.3f})")
    if outfit.overlap_band > 0:
        upper_in = body.trunk_radius + outfit.upper.offset
        lower_out = (body.trunk_radius + outfit.lower.offset
                     + outfit.lower.thickness)
        if upper_in <= lower_out + 1e-4:
            raise InvalidArgumentError(
                "overlapping outfit needs the upper shell radially outside "
                f"the lower waistband ({upper_in:.4f} <= {lower_out:.4f})")

    pb = _PrimBuilder()
    _build_upper(pb, body, outfit.upper, hem_z)
    coverage, _ = _build_lower(pb, body, outfit.lower, waist_z)
    for cap in body.capsules:
        pb.add(KIND_CAPSULE, cap.a, cap.b, cap.radius, 0.0,
               SOLID_BODY, NONE_CLASS, 0.0)
    kind, pa, pbb, r0, r1, solid, cls, off = pb.arrays()
    cov_seg = np.array([c[0] for c in coverage], dtype=np.int64)
    cov_t0 = np.array([c[1] for c in coverage])
    cov_t1 = np.array([c[2] for c in coverage])
    return Scene(body=body, outfit=outfit, kind=kind, pa=pa, pb=pbb,
                 r0=r0, r1=r1, prim_solid=solid, prim_class=cls,
                 prim_offset=off, cov_seg=cov_seg, cov_t0=cov_t0,
                 cov_t1=cov_t1, tight_threshold=tight_threshold,
                 meta=meta or SceneMeta())


def _seg_seg_distance(p1, q1, p2, q2) -> float:
    """Minimum distance between segments [p1,q1] and [p2,q2]."""
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = d1 @ d1
    e = d2 @ d2
    f = d2 @ r
    c = d1 @ r
    b = d1 @ d2
    denom = a * e - b * b
    s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > 1e-14 else 0.0
    t = (b * s + f) / e if e > 1e-14 else 0.0
    if t < 0.0:
        t = 0.0
        s = np.clip(-c / a, 0.0, 1.0) if a > 1e-14 else 0.0
    elif t > 1.0:
        t = 1.0
        s = np.clip((b - c) / a, 0.0, 1.0) if a > 1e-14 else 0.0
    return float(np.linalg.norm((p1 + s * d1) - (p2 + t * d2)))


def _pose_is_clear(body: BodyModel, outfit: Outfit) -> bool:
    """Reject poses where limbs would pierce the dressed trunk or each other."""
    trunk = body.capsules[0]
    tube_out = (trunk.radius + outfit.upper.offset + outfit.upper.thickness)
    for tag in ("l", "r"):
        fore = body.capsules[body.seg_index(f"forearm_{tag}")]
        d = _seg_seg_distance(fore.a, fore.b, trunk.a, trunk.b)
        if d < tube_out + fore.radius + 0.005:
            return False
    sl = body.capsules[body.seg_index("shin_l")]
    sr = body.capsules[body.seg_index("shin_r")]
    if _seg_seg_distance(sl.a, sl.b, sr.a, sr.b) < 0.9 * (sl.radius + sr.radius):
        return False
    return True


def sample_scene(outfit: Outfit, body_template: BodyTemplate | None = None,
                 seed: int = 0, max_retries: int = 20,
                 tight_threshold: float = DEFAULT_TIGHT_THRESHOLD) -> Scene:
    """Randomized posed scene for a concrete outfit, deterministic in seed.

    Poses that self-intersect beyond tolerance are rejected and resampled;
    the number of retries lands in the scene metadata.
    """
    template = body_template or default_body_template()
    shape = _draw(template.shape_ranges, np.random.default_rng([seed, 1]))
    for attempt in range(max_retries):
        pose = _draw(template.pose_ranges, np.random.default_rng([seed, 2, attempt]))
        body = pose_body(template, pose, shape)
        if _pose_is_clear(body, outfit):
            return build_scene(outfit, body, tight_threshold=tight_threshold,
                               meta=SceneMeta(retries=attempt))
    raise SceneGenerationError(
        f"no self-intersection-free pose found in {max_retries} attempts")


def scene_from_spec(spec: SceneSpec,
                    body_template: BodyTemplate | None = None,
                    max_retries: int = 20) -> Scene:
    """Scene from the on-disk description: shells and body shape come from
    shape_seed, the pose from pose_seed."""
    template = body_template or default_body_template()
    shape_rng = np.random.default_rng([spec.shape_seed, 1])
    shape = _draw(template.shape_ranges, shape_rng)
    outfit = sample_outfit(parse_garment(spec.upper), parse_garment(spec.lower),
                           spec.overlap_band_m, shape_rng)
    for attempt in range(max_retries):
        pose = _draw(template.pose_ranges,
                     np.random.default_rng([spec.pose_seed, 2, attempt]))
        body = pose_body(template, pose, shape)
        if _pose_is_clear(body, outfit):
            return build_scene(outfit, body,
                               meta=SceneMeta(retries=attempt,
                                              pose_seed=spec.pose_seed,
                                              shape_seed=spec.shape_seed))
    raise SceneGenerationError(
        f"no self-intersection-free pose found in {max_retries} attempts")
