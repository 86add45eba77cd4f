"""Multi-layer label model and the five encoding strategies.

A canonical label records, per point, whether the point belongs to the body
layer, which garment is visible at it, and which garment (if any) lies hidden
beneath the visible one. The five strategies map canonical labels to
per-layer integer targets for the segmentation heads and back.

Valid canonical labels satisfy two rules:
  * a hidden garment implies an upper-garment visible above a lower one,
  * no visible garment implies no hidden garment and body membership.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgumentError

NONE_CLASS = -1  # sentinel for "no garment" in visible/hidden arrays


class GarmentClass(enum.IntEnum):
    LONG_SHIRT = 0
    T_SHIRT = 1
    TOP = 2
    LONG_PANTS = 3
    SHORTS = 4
    SKIRT = 5

    @property
    def is_upper(self) -> bool:
        return self in UPPER_CLASSES

    @property
    def is_lower(self) -> bool:
        return self in LOWER_CLASSES

    @property
    def label(self) -> str:
        return _CLASS_NAMES[self]


UPPER_CLASSES = frozenset(
    {GarmentClass.LONG_SHIRT, GarmentClass.T_SHIRT, GarmentClass.TOP})
LOWER_CLASSES = frozenset(
    {GarmentClass.LONG_PANTS, GarmentClass.SHORTS, GarmentClass.SKIRT})

_CLASS_NAMES = {
    GarmentClass.LONG_SHIRT: "long-shirt",
    GarmentClass.T_SHIRT: "t-shirt",
    GarmentClass.TOP: "top",
    GarmentClass.LONG_PANTS: "long-pants",
    GarmentClass.SHORTS: "shorts",
    GarmentClass.SKIRT: "skirt",
}

_CLASS_ALIASES = {
    "long-shirt": GarmentClass.LONG_SHIRT,
    "long_shirt": GarmentClass.LONG_SHIRT,
    "longshirt": GarmentClass.LONG_SHIRT,
    "t-shirt": GarmentClass.T_SHIRT,
    "t_shirt": GarmentClass.T_SHIRT,
    "tshirt": GarmentClass.T_SHIRT,
    "top": GarmentClass.TOP,
    "long-pants": GarmentClass.LONG_PANTS,
    "long_pants": GarmentClass.LONG_PANTS,
    "longpants": GarmentClass.LONG_PANTS,
    "trousers": GarmentClass.LONG_PANTS,  # accepted alias, same class
    "pants": GarmentClass.LONG_PANTS,
    "shorts": GarmentClass.SHORTS,
    "skirt": GarmentClass.SKIRT,
}


def parse_garment(name: str) -> GarmentClass:
    key = name.strip().lower()
    if key not in _CLASS_ALIASES:
        raise InvalidArgumentError(f"unknown garment class {name!r}")
    return _CLASS_ALIASES[key]


class CanonicalLabel(NamedTuple):
    """Single-point ground truth: body bit, visible class, hidden class."""

    is_body: bool
    visible: GarmentClass | None
    hidden: GarmentClass | None


@dataclass(frozen=True)
class CanonicalLabels:
    """Column-wise canonical labels for N points.

    ``visible`` and ``hidden`` hold GarmentClass values or NONE_CLASS.
    """

    is_body: np.ndarray
    visible: np.ndarray
    hidden: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.is_body, dtype=bool)
        v = np.asarray(self.visible, dtype=np.int8)
        h = np.asarray(self.hidden, dtype=np.int8)
        if not (b.shape == v.shape == h.shape) or b.ndim != 1:
            raise InvalidArgumentError("label columns must share a 1-D shape")
        object.__setattr__(self, "is_body", b)
        object.__setattr__(self, "visible", v)
        object.__setattr__(self, "hidden", h)

    def __len__(self) -> int:
        return len(self.is_body)

    def validate(self) -> None:
        """Raise naming the first point that violates the label rules."""
        v, h, b = self.visible, self.hidden, self.is_body
        in_range = ((v >= NONE_CLASS) & (v <= 5) & (h >= NONE_CLASS) & (h <= 5))
        upper = (v >= 0) & (v <= 2)
        lower_h = (h >= 3) & (h <= 5)
        ok_hidden = (h == NONE_CLASS) | (upper & lower_h)
        ok_none = (v != NONE_CLASS) | ((h == NONE_CLASS) & b)
        ok = in_range & ok_hidden & ok_none
        if not ok.all():
            i = int(np.argmin(ok))
            raise InvalidArgumentError(
                f"invalid canonical label at point {i}: "
                f"(is_body={bool(b[i])}, visible={int(v[i])}, hidden={int(h[i])})")

    def at(self, i: int) -> CanonicalLabel:
        v = int(self.visible[i])
        h = int(self.hidden[i])
        return CanonicalLabel(
            bool(self.is_body[i]),
            GarmentClass(v) if v != NONE_CLASS else None,
            GarmentClass(h) if h != NONE_CLASS else None)

    @staticmethod
    def from_rows(rows) -> "CanonicalLabels":
        b = np.array([r.is_body for r in rows], dtype=bool)
        v = np.array([NONE_CLASS if r.visible is None else int(r.visible)
                      for r in rows], dtype=np.int8)
        h = np.array([NONE_CLASS if r.hidden is None else int(r.hidden)
                      for r in rows], dtype=np.int8)
        return CanonicalLabels(b, v, h)


def enumerate_valid_labels() -> list[CanonicalLabel]:
    """The full 31-element space of valid canonical labels."""
    out = [CanonicalLabel(True, None, None)]
    for b in (False, True):
        for v in GarmentClass:
            out.append(CanonicalLabel(b, v, None))
    for b in (False, True):
        for v in sorted(UPPER_CLASSES):
            for h in sorted(LOWER_CLASSES):
                out.append(CanonicalLabel(b, v, h))
    return out


class Strategy(enum.Enum):
    S1 = "s1"  # single layer: other / upper / overlap / lower
    S2 = "s2"  # body + binary upper + binary lower (overlap implicit)
    S3 = "s3"  # body + visible upper/lower + binary hidden (overlap explicit)
    S4 = "s4"  # body + upper classes + lower classes (overlap implicit)
    S5 = "s5"  # body + visible class + hidden class (overlap explicit)

    @property
    def layer_names(self) -> tuple[str, ...]:
        return LAYER_NAMES[self]

    @property
    def class_counts(self) -> tuple[int, ...]:
        return tuple(len(t) for t in CLASS_CODE_TABLES[self])

    @property
    def num_layers(self) -> int:
        return len(CLASS_CODE_TABLES[self])


def parse_strategy(name: str) -> Strategy:
    try:
        return Strategy(name.strip().lower())
    except ValueError:
        raise InvalidArgumentError(f"unknown strategy {name!r}") from None


# Code tables: per strategy, per layer, code -> class name. Code 0 is always
# other/no-body; the orders below are the canonical report column orders.
CLASS_CODE_TABLES: dict[Strategy, tuple[tuple[str, ...], ...]] = {
    Strategy.S1: (("other", "upper", "overlap", "lower"),),
    Strategy.S2: (
        ("no-body", "body"),
        ("other", "upper"),
        ("other", "lower"),
    ),
    Strategy.S3: (
        ("no-body", "body"),
        ("other", "upper", "lower"),
        ("other", "hidden"),
    ),
    Strategy.S4: (
        ("no-body", "body"),
        ("other", "long-shirt", "t-shirt", "top"),
        ("other", "long-pants", "shorts", "skirt"),
    ),
    Strategy.S5: (
        ("no-body", "body"),
        ("other", "t-shirt", "shorts", "long-pants", "long-shirt", "top", "skirt"),
        ("other", "skirt", "shorts", "long-pants"),
    ),
}

LAYER_NAMES: dict[Strategy, tuple[str, ...]] = {
    Strategy.S1: ("layer1",),
    Strategy.S2: ("layer1", "layer2", "layer3"),
    Strategy.S3: ("layer1", "layer2", "layer3"),
    Strategy.S4: ("layer1", "layer2", "layer3"),
    Strategy.S5: ("layer1", "layer2", "layer3"),
}

# GarmentClass -> per-strategy class code, derived from the tables above.
_S4_UPPER = {GarmentClass.LONG_SHIRT: 1, GarmentClass.T_SHIRT: 2,
             GarmentClass.TOP: 3}
_S4_LOWER = {GarmentClass.LONG_PANTS: 1, GarmentClass.SHORTS: 2,
             GarmentClass.SKIRT: 3}
_S5_VISIBLE = {GarmentClass.T_SHIRT: 1, GarmentClass.SHORTS: 2,
               GarmentClass.LONG_PANTS: 3, GarmentClass.LONG_SHIRT: 4,
               GarmentClass.TOP: 5, GarmentClass.SKIRT: 6}
_S5_HIDDEN = {GarmentClass.SKIRT: 1, GarmentClass.SHORTS: 2,
              GarmentClass.LONG_PANTS: 3}


def _lut(mapping: dict[GarmentClass, int]) -> np.ndarray:
    lut = np.zeros(7, dtype=np.int64)  # index shifted by 1 so -1 maps to 0
    for cls, code in mapping.items():
        lut[int(cls) + 1] = code
    return lut


_S4_UPPER_LUT = _lut(_S4_UPPER)
_S4_LOWER_LUT = _lut(_S4_LOWER)
_S5_VISIBLE_LUT = _lut(_S5_VISIBLE)
_S5_HIDDEN_LUT = _lut(_S5_HIDDEN)
_S5_VISIBLE_INV = {v: k for k, v in _S5_VISIBLE.items()}
_S5_HIDDEN_INV = {v: k for k, v in _S5_HIDDEN.items()}
_S4_UPPER_INV = {v: k for k, v in _S4_UPPER.items()}
_S4_LOWER_INV = {v: k for k, v in _S4_LOWER.items()}

COARSE_OTHER, COARSE_UPPER, COARSE_OVERLAP, COARSE_LOWER = 0, 1, 2, 3


@dataclass(frozen=True)
class StrategyLabels:
    """Per-layer integer targets for one strategy."""

    strategy: Strategy
    layers: tuple[np.ndarray, ...]
    class_counts: tuple[int, ...]

    def __post_init__(self):
        expect = self.strategy.class_counts
        if self.class_counts != expect:
            raise InvalidArgumentError(
                f"class counts {self.class_counts} do not match "
                f"{self.strategy}: {expect}")
        layers = tuple(np.asarray(l, dtype=np.int64) for l in self.layers)
        if len(layers) != self.strategy.num_layers:
            raise InvalidArgumentError("wrong number of layers")
        n = len(layers[0])
        for arr, count in zip(layers, self.class_counts):
            if arr.shape != (n,):
                raise InvalidArgumentError("layer arrays must share length")
            if len(arr) and (arr.min() < 0 or arr.max() >= count):
                raise InvalidArgumentError("label code out of range")
        object.__setattr__(self, "layers", layers)

    def __len__(self) -> int:
        return len(self.layers[0])


@dataclass(frozen=True)
class CoarseLabels:
    """Coarse projection: other/upper/overlap/lower codes plus body bit.

    ``body`` is None for the single-layer strategy, which ignores the body.
    """

    coarse: np.ndarray
    body: np.ndarray | None


@dataclass(frozen=True)
class DecodeResult:
    """Decoded labels plus the number of repaired prediction inconsistencies."""

    labels: "CanonicalLabels | CoarseLabels"
    inconsistencies: int


def _masks(labels: CanonicalLabels):
    v, h = labels.visible, labels.hidden
    upper = (v >= 0) & (v <= 2)
    lower = (v >= 3) & (v <= 5)
    hid = h != NONE_CLASS
    return upper, lower, hid


def encode(labels: CanonicalLabels, strategy: Strategy) -> StrategyLabels:
    """Map canonical labels to the strategy's per-layer codes."""
    labels.validate()
    upper, lower, hid = _masks(labels)
    body = labels.is_body.astype(np.int64)
    v, h = labels.visible, labels.hidden

    if strategy is Strategy.S1:
        l1 = np.zeros(len(labels), dtype=np.int64)
        l1[upper] = 1
        l1[upper & hid] = 2
        l1[lower] = 3
        layers = (l1,)
    elif strategy is Strategy.S2:
        l2 = upper.astype(np.int64)
        l3 = (lower | hid).astype(np.int64)
        layers = (body, l2, l3)
    elif strategy is Strategy.S3:
        l2 = np.zeros(len(labels), dtype=np.int64)
        l2[upper] = 1
        l2[lower] = 2
        layers = (body, l2, hid.astype(np.int64))
    elif strategy is Strategy.S4:
        l2 = _S4_UPPER_LUT[v.astype(np.int64) + 1]
        lower_cls = np.where(lower, v, h).astype(np.int64)
        l3 = _S4_LOWER_LUT[lower_cls + 1]
        layers = (body, l2, l3)
    else:
        l2 = _S5_VISIBLE_LUT[v.astype(np.int64) + 1]
        l3 = _S5_HIDDEN_LUT[h.astype(np.int64) + 1]
        layers = (body, l2, l3)
    return StrategyLabels(strategy=strategy, layers=layers,
                          class_counts=strategy.class_counts)


def coarse_project(labels: CanonicalLabels) -> CoarseLabels:
    """Collapse canonical labels to other/upper/overlap/lower plus body bit."""
    upper, lower, hid = _masks(labels)
    coarse = np.zeros(len(labels), dtype=np.int8)
    coarse[upper] = COARSE_UPPER
    coarse[upper & hid] = COARSE_OVERLAP
    coarse[lower] = COARSE_LOWER
    return CoarseLabels(coarse=coarse, body=labels.is_body.copy())


def decode(enc: StrategyLabels) -> DecodeResult:
    """Invert an encoding.

    Fine-grained strategies decode to canonical labels; coarse ones to the
    other/upper/overlap/lower projection. Impossible code combinations (only
    reachable from predictions, since the heads are independent) are not
    rejected: the hidden claim is dropped and counted.
    """
    s = enc.strategy
    if s is Strategy.S5:
        l1, l2, l3 = enc.layers
        v = np.full(len(enc), NONE_CLASS, dtype=np.int8)
        for code, cls in _S5_VISIBLE_INV.items():
            v[l2 == code] = int(cls)
        h = np.full(len(enc), NONE_CLASS, dtype=np.int8)
        for code, cls in _S5_HIDDEN_INV.items():
            h[l3 == code] = int(cls)
        bad = (h != NONE_CLASS) & ~((v >= 0) & (v <= 2))
        h[bad] = NONE_CLASS
        labels = CanonicalLabels(l1.astype(bool), v, h)
        return DecodeResult(labels, int(bad.sum()))
    if s is Strategy.S4:
        l1, l2, l3 = enc.layers
        v = np.full(len(enc), NONE_CLASS, dtype=np.int8)
        h = np.full(len(enc), NONE_CLASS, dtype=np.int8)
        for code, cls in _S4_UPPER_INV.items():
            v[l2 == code] = int(cls)
        both = (l2 != 0) & (l3 != 0)
        for code, cls in _S4_LOWER_INV.items():
            h[both & (l3 == code)] = int(cls)
            v[(~both) & (l3 == code)] = int(cls)  # lone lower garment is visible
        labels = CanonicalLabels(l1.astype(bool), v, h)
        return DecodeResult(labels, 0)
    if s is Strategy.S1:
        (l1,) = enc.layers
        return DecodeResult(CoarseLabels(coarse=l1.astype(np.int8), body=None), 0)
    if s is Strategy.S2:
        l1, l2, l3 = enc.layers
        coarse = np.zeros(len(enc), dtype=np.int8)
        coarse[l2 == 1] = COARSE_UPPER
        coarse[(l2 == 1) & (l3 == 1)] = COARSE_OVERLAP
        coarse[(l2 == 0) & (l3 == 1)] = COARSE_LOWER
        return DecodeResult(CoarseLabels(coarse=coarse, body=l1.astype(bool)), 0)
    # S3: a hidden claim without a visible upper garment is inconsistent
    l1, l2, l3 = enc.layers
    coarse = np.zeros(len(enc), dtype=np.int8)
    coarse[l2 == 1] = COARSE_UPPER
    coarse[l2 == 2] = COARSE_LOWER
    coarse[(l2 == 1) & (l3 == 1)] = COARSE_OVERLAP
    bad = (l3 == 1) & (l2 != 1)
    return DecodeResult(CoarseLabels(coarse=coarse, body=l1.astype(bool)),
                        int(bad.sum()))


def overlap_mask(enc: StrategyLabels) -> np.ndarray:
    """Points the encoding marks as garment-overlap."""
    s = enc.strategy
    if s is Strategy.S1:
        return enc.layers[0] == 2
    if s is Strategy.S2:
        return (enc.layers[1] == 1) & (enc.layers[2] == 1)
    if s is Strategy.S3:
        return enc.layers[2] == 1
    if s is Strategy.S4:
        return (enc.layers[1] != 0) & (enc.layers[2] != 0)
    return enc.layers[2] != 0


def consistency_check(e1: StrategyLabels, e2: StrategyLabels) -> int:
    """Count points whose overlap status differs between two encodings.

    Ground-truth encodings of the same canonical labels always agree; a
    nonzero count therefore indicates corrupted or predicted labels.
    """
    if len(e1) != len(e2):
        raise InvalidArgumentError(
            f"encodings cover {len(e1)} vs {len(e2)} points")
    return int((overlap_mask(e1) != overlap_mask(e2)).sum())
