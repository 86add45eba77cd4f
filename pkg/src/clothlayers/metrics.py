"""Per-layer segmentation metrics.

Counts are kept as exact integers (full confusion matrix per layer) and only
divided at report time, so batch order never changes a result. A class with
an empty IoU denominator is undefined and excluded from means; a class absent
from the ground truth but present in predictions has a nonzero denominator
and is included.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .layering import CLASS_CODE_TABLES, Strategy, StrategyLabels


@dataclass
class ConfusionAccumulator:
    """Mergeable per-layer confusion matrices (rows = truth, cols = predicted)."""

    strategy: Strategy
    matrices: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if not self.matrices:
            self.matrices = [np.zeros((c, c), dtype=np.int64)
                             for c in self.strategy.class_counts]

    # counts ---------------------------------------------------------

    def tp(self, layer: int, cls: int) -> int:
        return int(self.matrices[layer][cls, cls])

    def fp(self, layer: int, cls: int) -> int:
        m = self.matrices[layer]
        return int(m[:, cls].sum() - m[cls, cls])

    def fn(self, layer: int, cls: int) -> int:
        m = self.matrices[layer]
        return int(m[cls, :].sum() - m[cls, cls])

    def total_points(self, layer: int) -> int:
        return int(self.matrices[layer].sum())

    def correct_points(self, layer: int) -> int:
        return int(np.trace(self.matrices[layer]))

    def merge(self, other: "ConfusionAccumulator") -> "ConfusionAccumulator":
        if other.strategy is not self.strategy:
            raise InvalidArgumentError("cannot merge different strategies")
        out = ConfusionAccumulator(self.strategy)
        out.matrices = [a + b for a, b in zip(self.matrices, other.matrices)]
        return out

    @staticmethod
    def from_matrices(strategy: Strategy, matrices) -> "ConfusionAccumulator":
        acc = ConfusionAccumulator(strategy)
        for layer, m in enumerate(matrices):
            m = np.asarray(m, dtype=np.int64)
            if m.shape != acc.matrices[layer].shape:
                raise InvalidArgumentError("confusion matrix shape mismatch")
            acc.matrices[layer] = m.copy()
        return acc


def accumulate(pred: StrategyLabels, gt: StrategyLabels,
               acc: ConfusionAccumulator) -> ConfusionAccumulator:
    """Add one batch of predictions to the accumulator (in place)."""
    if pred.strategy is not gt.strategy or pred.strategy is not acc.strategy:
        raise InvalidArgumentError("strategy mismatch")
    if len(pred) != len(gt):
        raise InvalidArgumentError(
            f"prediction covers {len(pred)} points, ground truth {len(gt)}")
    for layer, count in enumerate(acc.strategy.class_counts):
        flat = gt.layers[layer] * count + pred.layers[layer]
        acc.matrices[layer] += np.bincount(
            flat, minlength=count * count).reshape(count, count)
    return acc


def iou(acc: ConfusionAccumulator, layer: int, cls: int) -> float | None:
    """Intersection over union TP/(TP+FN+FP); None when undefined."""
    tp = acc.tp(layer, cls)
    denom = tp + acc.fn(layer, cls) + acc.fp(layer, cls)
    if denom == 0:
        return None
    return tp / denom


def miou(acc: ConfusionAccumulator, layer: int) -> float:
    """Unweighted mean IoU over the layer's defined classes."""
    vals = [iou(acc, layer, c)
            for c in range(acc.strategy.class_counts[layer])]
    vals = [v for v in vals if v is not None]
    if not vals:
        raise InvalidArgumentError(f"layer {layer} has no defined class IoU")
    return float(sum(vals) / len(vals))


def avg_miou(acc: ConfusionAccumulator) -> float:
    """Mean of the per-layer mean IoUs."""
    layers = range(len(acc.strategy.class_counts))
    vals = [miou(acc, l) for l in layers]
    return float(sum(vals) / len(vals))


def macc_allacc(acc: ConfusionAccumulator, layer: int) -> tuple[float, float]:
    """(mean per-class accuracy over present classes, overall accuracy)."""
    total = acc.total_points(layer)
    if total == 0:
        raise InvalidArgumentError("empty accumulator")
    accs = []
    for c in range(acc.strategy.class_counts[layer]):
        tp = acc.tp(layer, c)
        support = tp + acc.fn(layer, c)
        if support > 0:
            accs.append(tp / support)
    return float(sum(accs) / len(accs)), acc.correct_points(layer) / total


# --- reports -------------------------------------------------------------

def _fmt(x: float | None) -> str:
    return "  n/a" if x is None else f"{100.0 * x:5.1f}"


@dataclass(frozen=True)
class MetricReport:
    """Strategy-shaped metric table: per-class IoU, layer mIoU, averages."""

    strategy: Strategy
    row_label: str
    avg_miou: float
    layer_miou: tuple[float, ...]
    class_iou: tuple[tuple[float | None, ...], ...]
    macc: float | None
    allacc: float | None
    inconsistencies: int | None = None

    def to_dict(self) -> dict:
        layers = []
        for layer, names in enumerate(CLASS_CODE_TABLES[self.strategy]):
            layers.append({
                "miou": self.layer_miou[layer],
                "iou": {name: self.class_iou[layer][code]
                        for code, name in enumerate(names)},
            })
        out = {
            "strategy": self.strategy.value,
            "row": self.row_label,
            "avg_miou": self.avg_miou,
            "layers": layers,
        }
        if self.macc is not None:
            out["macc"] = self.macc
            out["allacc"] = self.allacc
        if self.inconsistencies is not None:
            out["inconsistencies"] = self.inconsistencies
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        tables = CLASS_CODE_TABLES[self.strategy]
        if self.strategy is Strategy.S1:
            head = ["method", "mIoU", "mAcc", "allAcc", *tables[0]]
            row = [self.row_label, _fmt(self.layer_miou[0]), _fmt(self.macc),
                   _fmt(self.allacc), *(_fmt(v) for v in self.class_iou[0])]
        else:
            head = ["backbone", "avg mIoU"]
            row = [self.row_label, _fmt(self.avg_miou)]
            for layer, names in enumerate(tables):
                head.append(f"| L{layer + 1} mIoU")
                row.append("| " + _fmt(self.layer_miou[layer]).strip())
                head.extend(names)
                row.extend(_fmt(v) for v in self.class_iou[layer])
        widths = [max(len(h), len(r)) for h, r in zip(head, row)]
        lines = [
            "  ".join(h.rjust(w) for h, w in zip(head, widths)),
            "  ".join(r.rjust(w) for r, w in zip(row, widths)),
        ]
        if self.inconsistencies is not None:
            lines.append(f"cross-layer inconsistencies: {self.inconsistencies}")
        return "\n".join(lines)


def report(acc: ConfusionAccumulator, row_label: str = "run",
           inconsistencies: int | None = None) -> MetricReport:
    strategy = acc.strategy
    class_iou = tuple(
        tuple(iou(acc, layer, c) for c in range(count))
        for layer, count in enumerate(strategy.class_counts))
    layer_miou = tuple(miou(acc, layer)
                       for layer in range(len(strategy.class_counts)))
    macc = allacc = None
    if strategy is Strategy.S1:
        macc, allacc = macc_allacc(acc, 0)
    return MetricReport(
        strategy=strategy, row_label=row_label, avg_miou=avg_miou(acc),
        layer_miou=layer_miou, class_iou=class_iou, macc=macc, allacc=allacc,
        inconsistencies=inconsistencies)
