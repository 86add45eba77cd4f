"""Per-point feature backbones and the multi-head segmentation model.

Three desk-scale feature extractors share one contract: (positions, normals)
in, an (N, feature_width) per-point embedding out.

  * SetHierarchyBackbone: sample-and-group encoder (farthest point sampling,
    ball-query neighborhoods, pooled MLPs) with a mirrored decoder that
    upsamples through inverse-distance interpolation over 3 coarse neighbors.
  * EdgeConvBackbone: per-level kNN graphs recomputed in feature space, a
    shared MLP on (feature, neighbor - feature) pairs, max pooling.
  * TransformerBlockBackbone: one transition-down / transition-up pair
    around a vector self-attention block over k spatial neighbors with an
    MLP positional term on relative coordinates.

Sampling starts from the lexicographically smallest point rather than a
fixed row, so predictions commute with input permutations (up to exact
coordinate ties). Neighbor indices are constants: gradients flow through
gathered features, not through the selection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import geometry
from ..errors import InvalidArgumentError
from ..layering import Strategy
from .modules import MLP, Linear, Module
from .tensor import (Tensor, amax, concat, expand, gather, layer_norm,
                     reshape, softmax, total)

BACKBONE_NAMES = ("set", "edge", "pt")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture settings; ``heads`` defaults to the strategy's layers."""

    backbone: str = "pt"
    feature_width: int = 64
    depth: int = 2
    k_neighbors: int = 16
    radius_scale: float = 1.0
    down_stride: int = 4
    augment: bool = False
    dtype: str = "float32"
    seed: int = 0
    heads: tuple[tuple[str, int], ...] | None = None

    def __post_init__(self):
        if self.backbone not in BACKBONE_NAMES:
            raise InvalidArgumentError(
                f"backbone must be one of {BACKBONE_NAMES}")

    def np_dtype(self):
        return np.float64 if self.dtype == "float64" else np.float32

    def to_dict(self) -> dict:
        return {
            "backbone": self.backbone, "feature_width": self.feature_width,
            "depth": self.depth, "k_neighbors": self.k_neighbors,
            "radius_scale": self.radius_scale,
            "down_stride": self.down_stride, "augment": self.augment,
            "dtype": self.dtype, "seed": self.seed,
            "heads": None if self.heads is None else [list(h) for h in self.heads],
        }

    @staticmethod
    def from_dict(raw: dict) -> "ModelConfig":
        heads = raw.get("heads")
        return ModelConfig(
            backbone=raw["backbone"], feature_width=int(raw["feature_width"]),
            depth=int(raw["depth"]), k_neighbors=int(raw["k_neighbors"]),
            radius_scale=float(raw["radius_scale"]),
            down_stride=int(raw.get("down_stride", 4)),
            augment=bool(raw["augment"]),
            dtype=raw["dtype"], seed=int(raw["seed"]),
            heads=None if heads is None else tuple((n, int(c)) for n, c in heads))


def _canonical_start(pos: np.ndarray) -> int:
    """Lexicographically smallest point: permutation-invariant FPS seed."""
    return int(np.lexsort((pos[:, 2], pos[:, 1], pos[:, 0]))[0])


def _input_features(positions: np.ndarray, normals: np.ndarray, dtype):
    pos = np.asarray(positions, dtype=np.float64)
    centered = pos - pos.mean(axis=0, keepdims=True)
    feats = np.concatenate([centered, np.asarray(normals)], axis=1)
    return centered, Tensor(feats.astype(dtype))


def _interpolate(fine_pos: np.ndarray, coarse_pos: np.ndarray,
                 coarse_feat: Tensor, dtype) -> Tensor:
    """Inverse-distance-weighted features of the 3 nearest coarse points."""
    nl = geometry.knn(fine_pos, coarse_pos, min(3, len(coarse_pos)))
    w = 1.0 / (nl.distances + 1e-8)
    w /= w.sum(axis=1, keepdims=True)
    neigh = gather(coarse_feat, nl.indices)            # (N, 3, C)
    return total(neigh * Tensor(w[:, :, None].astype(dtype)), axis=1)


class _Heads(Module):
    def __init__(self, width: int, heads: tuple[tuple[str, int], ...],
                 rng: np.random.Generator, dtype):
        self.blocks = [MLP([width, width, classes], rng, dtype)
                       for _, classes in heads]
        self.names = tuple(name for name, _ in heads)

    def __call__(self, feats: Tensor) -> list[Tensor]:
        return [blk(feats) for blk in self.blocks]


class SetHierarchyBackbone(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        w = cfg.feature_width
        dt = cfg.np_dtype()
        self.cfg = cfg
        self.enc0 = MLP([6, w // 2, w // 2], rng, dt, final_activation=True)
        self.radii = tuple(cfg.radius_scale * r for r in (0.14, 0.30))
        self.enc1 = MLP([w // 2 + 3, w, w], rng, dt, final_activation=True)
        self.enc2 = MLP([w + 3, w, w], rng, dt, final_activation=True)
        self.dec1 = MLP([w + w, w], rng, dt, final_activation=True)
        # the last propagation stage also sees the raw per-point inputs
        self.dec0 = MLP([w + w // 2 + 6, w, w], rng, dt)

    def _down(self, pos, feat, m, radius, mlp, dtype):
        k = self.cfg.k_neighbors
        centers = geometry.farthest_point_sample(pos, m, _canonical_start(pos))
        cpos = pos[centers]
        groups = geometry.ball_query(centers, pos, radius, k)
        rel = (pos[groups] - cpos[:, None, :]).astype(dtype)
        grouped = concat([gather(feat, groups), Tensor(rel)], axis=2)
        return cpos, amax(mlp(grouped), axis=1)

    def __call__(self, positions, normals) -> Tensor:
        cfg = self.cfg
        dt = cfg.np_dtype()
        pos, feats = _input_features(positions, normals, dt)
        n = len(pos)
        if n < cfg.k_neighbors:
            raise InvalidArgumentError(
                f"need at least k_neighbors={cfg.k_neighbors} points, got {n}")
        f0 = self.enc0(feats)
        m1 = max(n // cfg.down_stride, min(n, 8))
        p1, f1 = self._down(pos, f0, m1, self.radii[0], self.enc1, dt)
        m2 = max(m1 // cfg.down_stride, min(m1, 8))
        p2, f2 = self._down(p1, f1, m2, self.radii[1], self.enc2, dt)
        u1 = self.dec1(concat([_interpolate(p1, p2, f2, dt), f1], axis=1))
        u0 = self.dec0(concat([_interpolate(pos, p1, u1, dt), f0, feats],
                              axis=1))
        return u0


class EdgeConvBackbone(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        w = cfg.feature_width
        dt = cfg.np_dtype()
        self.cfg = cfg
        widths = [6] + [w] * max(cfg.depth, 1)
        self.levels = [MLP([2 * widths[i], widths[i + 1], widths[i + 1]],
                           rng, dt, final_activation=True)
                       for i in range(len(widths) - 1)]
        self.out = MLP([sum(widths[1:]), w], rng, dt)

    def __call__(self, positions, normals) -> Tensor:
        cfg = self.cfg
        dt = cfg.np_dtype()
        pos, feats = _input_features(positions, normals, dt)
        n = len(pos)
        if n < cfg.k_neighbors:
            raise InvalidArgumentError(
                f"need at least k_neighbors={cfg.k_neighbors} points, got {n}")
        k = cfg.k_neighbors
        collected = []
        f = feats
        for lvl, mlp in enumerate(self.levels):
            # level 0 builds the graph in coordinate space, deeper levels in
            # the current feature space
            space = pos if lvl == 0 else f.data
            idx = geometry.knn(space, space, k).indices
            fj = gather(f, idx)
            fi = expand(reshape(f, (n, 1, f.shape[1])), fj.shape)
            edge = concat([fi, fj - fi], axis=2)
            f = amax(mlp(edge), axis=1)
            collected.append(f)
        return self.out(concat(collected, axis=1))


class TransformerBlockBackbone(Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        w = cfg.feature_width
        dt = cfg.np_dtype()
        self.cfg = cfg
        self.enc = MLP([6, w, w], rng, dt, final_activation=True)
        self.down = MLP([w, w], rng, dt, final_activation=True)
        self.q = Linear(w, w, rng, dt)
        self.k = Linear(w, w, rng, dt)
        self.v = Linear(w, w, rng, dt)
        self.pos_mlp = MLP([3, w, w], rng, dt)
        self.attn_mlp = MLP([w, w, w], rng, dt)
        self.o = Linear(w, w, rng, dt)
        # transition up fuses the skip features and the raw inputs
        self.up = MLP([w + w + 6, w, w], rng, dt)

    def __call__(self, positions, normals) -> Tensor:
        cfg = self.cfg
        dt = cfg.np_dtype()
        pos, feats = _input_features(positions, normals, dt)
        n = len(pos)
        if n < cfg.k_neighbors:
            raise InvalidArgumentError(
                f"need at least k_neighbors={cfg.k_neighbors} points, got {n}")
        k = cfg.k_neighbors
        f0 = self.enc(feats)

        # transition down: pool each sampled center over its k fine neighbors
        m = max(n // cfg.down_stride, min(n, 8))
        centers = geometry.farthest_point_sample(pos, m, _canonical_start(pos))
        cpos = pos[centers]
        g = geometry.knn(cpos, pos, k).indices
        fd = layer_norm(amax(self.down(gather(f0, g)), axis=1))

        # vector self-attention over k coarse spatial neighbors; the block
        # is pre-normalized so high learning rates stay stable
        idx = geometry.knn(cpos, cpos, min(k, m)).indices
        rel = (cpos[:, None, :] - cpos[idx]).astype(dt)
        delta = self.pos_mlp(Tensor(rel))
        fn = layer_norm(fd)
        q = self.q(fn)
        kn = gather(self.k(fn), idx)
        vn = gather(self.v(fn), idx)
        h = expand(reshape(q, (m, 1, q.shape[1])), kn.shape) - kn + delta
        wgt = softmax(self.attn_mlp(h), axis=1)
        fd = fd + self.o(total(wgt * (vn + delta), axis=1))

        # transition up: interpolate back to full resolution, fuse the skip
        fu = _interpolate(pos, cpos, fd, dt)
        return self.up(concat([layer_norm(fu), layer_norm(f0), feats], axis=1))


_BACKBONES = {
    "set": SetHierarchyBackbone,
    "edge": EdgeConvBackbone,
    "pt": TransformerBlockBackbone,
}


class MultiHeadSegmenter(Module):
    """Shared backbone with one independent MLP head per layer."""

    def __init__(self, strategy: Strategy, cfg: ModelConfig):
        heads = cfg.heads
        expected = tuple(zip(strategy.layer_names, strategy.class_counts))
        if heads is None:
            heads = expected
        elif tuple(heads) != expected:
            raise InvalidArgumentError(
                f"heads {heads} do not match strategy layers {expected}")
        self.strategy = strategy
        self.cfg = cfg
        rng = np.random.default_rng([cfg.seed, 11])
        self.backbone = _BACKBONES[cfg.backbone](cfg, rng)
        self.heads = _Heads(cfg.feature_width, heads, rng, cfg.np_dtype())

    def __call__(self, positions, normals) -> list[Tensor]:
        feats = self.backbone(positions, normals)
        return self.heads(feats)


def heads_forward(features: Tensor, heads: _Heads) -> list[Tensor]:
    """Apply independent per-layer heads to a feature matrix."""
    for blk in heads.blocks:
        expect = blk.layers[0].weight.shape[0]
        if features.shape[1] != expect:
            raise InvalidArgumentError(
                f"feature width {features.shape[1]} does not match "
                f"head input {expect}")
    return heads(features)


def build_model(strategy: Strategy, cfg: ModelConfig) -> MultiHeadSegmenter:
    return MultiHeadSegmenter(strategy, cfg)
