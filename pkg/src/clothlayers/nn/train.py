"""Training recipe: AdamW, one-cycle cosine schedule, summed per-layer loss.

The reference path is single-threaded and fully deterministic in the seed:
per-epoch RNG streams are derived as (seed, epoch), so a resumed run shuffles
and augments exactly like an uninterrupted one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import geometry
from ..errors import InvalidArgumentError, TrainingDivergedError
from ..layering import Strategy, StrategyLabels, encode
from ..metrics import ConfusionAccumulator, accumulate, avg_miou, miou
from ..scanner import LabeledScan
from .backbones import ModelConfig, MultiHeadSegmenter, build_model
from .tensor import Tensor, cross_entropy


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 8
    lr_peak: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 0.01
    seed: int = 0
    class_weights: tuple[tuple[float, ...], ...] | None = None
    div_start: float = 25.0
    div_final: float = 1e4
    eval_every: int = 5
    target_val_avg_miou: float | None = None
    target_train_avg_miou: float | None = None

    def __post_init__(self):
        if self.lr_peak <= 0:
            raise InvalidArgumentError("lr_peak must be > 0")
        if self.epochs < 1:
            raise InvalidArgumentError("epochs must be >= 1")

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs, "batch_size": self.batch_size,
            "lr_peak": self.lr_peak, "beta1": self.beta1, "beta2": self.beta2,
            "weight_decay": self.weight_decay, "seed": self.seed,
            "class_weights": self.class_weights,
            "div_start": self.div_start, "div_final": self.div_final,
            "eval_every": self.eval_every,
            "target_val_avg_miou": self.target_val_avg_miou,
            "target_train_avg_miou": self.target_train_avg_miou,
        }


def one_cycle_lr(step: float, total_steps: float, lr_peak: float,
                 div_start: float = 25.0, div_final: float = 1e4) -> float:
    """Cosine ramp to the peak at the midpoint, cosine anneal to the floor."""
    half = total_steps / 2.0
    lo = lr_peak / div_start
    fin = lr_peak / div_final
    if step <= half:
        s = step / half if half > 0 else 1.0
        return lo + (lr_peak - lo) * (1.0 - np.cos(np.pi * s)) / 2.0
    s = (step - half) / (total_steps - half)
    return fin + (lr_peak - fin) * (1.0 + np.cos(np.pi * s)) / 2.0


class AdamW:
    """Decoupled weight decay Adam. With zero gradients the update reduces
    to pure decay; with weight_decay = 0 it is then a no-op."""

    def __init__(self, params: dict[str, Tensor], lr_peak: float,
                 beta1: float = 0.9, beta2: float = 0.999,
                 weight_decay: float = 0.01, eps: float = 1e-8):
        self.params = params
        self.lr_peak = lr_peak
        self.beta1 = beta1
        self.beta2 = beta2
        self.weight_decay = weight_decay
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self, lr: float) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        bc1 = 1.0 - b1 ** self.step_count
        bc2 = 1.0 - b2 ** self.step_count
        for k, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m = self.m[k] = b1 * self.m[k] + (1.0 - b1) * g
            v = self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data = p.data - lr * (update + self.weight_decay * p.data)

    def state(self) -> dict[str, np.ndarray]:
        out = {}
        for k in self.params:
            out[f"opt.m.{k}"] = self.m[k].copy()
            out[f"opt.v.{k}"] = self.v[k].copy()
        return out

    def load_state(self, tensors: dict[str, np.ndarray], step_count: int):
        for k in self.params:
            self.m[k] = np.asarray(tensors[f"opt.m.{k}"]).copy()
            self.v[k] = np.asarray(tensors[f"opt.v.{k}"]).copy()
        self.step_count = step_count


def multilayer_loss(logits: list[Tensor], gt: StrategyLabels,
                    class_weights=None) -> Tensor:
    """Sum over layers of the mean per-point cross-entropy."""
    if len(logits) != len(gt.layers):
        raise InvalidArgumentError(
            f"{len(logits)} logit blocks for {len(gt.layers)} layers")
    loss = None
    for layer, (lg, target) in enumerate(zip(logits, gt.layers)):
        if lg.shape != (len(target), gt.class_counts[layer]):
            raise InvalidArgumentError(
                f"layer {layer} logits {lg.shape} do not match "
                f"{(len(target), gt.class_counts[layer])}")
        w = None if class_weights is None else class_weights[layer]
        term = cross_entropy(lg, target, w)
        loss = term if loss is None else loss + term
    return loss


def predict(model: MultiHeadSegmenter, scan_or_cloud,
            strategy: Strategy | None = None) -> StrategyLabels:
    """Per-layer argmax labels; ties resolve to the lower class index."""
    strategy = strategy or model.strategy
    if strategy is not model.strategy:
        raise InvalidArgumentError("model was built for a different strategy")
    cloud = getattr(scan_or_cloud, "cloud", scan_or_cloud)
    logits = model(cloud.positions, cloud.normals)
    layers = tuple(np.argmax(lg.data, axis=1).astype(np.int64)
                   for lg in logits)
    return StrategyLabels(strategy=strategy, layers=layers,
                          class_counts=strategy.class_counts)


def _augment_cloud(cloud, rng: np.random.Generator):
    """Random rotation about the vertical axis, isotropic scale, translation.

    Positions and normals transform; labels never do.
    """
    rot = geometry.random_rotation_z(rng)
    scale = float(rng.uniform(0.9, 1.1))
    t = rng.uniform(-0.1, 0.1, 3)
    return geometry.transform(cloud, rot, scale, t)


@dataclass
class TrainResult:
    model: MultiHeadSegmenter
    log: list[dict] = field(default_factory=list)
    final_epoch: int = 0
    best_val_avg_miou: float | None = None
    optimizer: "AdamW | None" = None


def evaluate(model: MultiHeadSegmenter, dataset: list[LabeledScan],
             strategy: Strategy) -> ConfusionAccumulator:
    acc = ConfusionAccumulator(strategy)
    for scan_ in dataset:
        accumulate(predict(model, scan_), encode(scan_.labels, strategy), acc)
    return acc


def train(dataset: list[LabeledScan], strategy: Strategy,
          model_cfg: ModelConfig, train_cfg: TrainConfig,
          val_dataset: list[LabeledScan] | None = None,
          model: MultiHeadSegmenter | None = None,
          start_epoch: int = 0,
          optimizer_state: tuple[dict, int] | None = None,
          on_epoch=None) -> TrainResult:
    """Fit the multi-head model; deterministic in the seeds.

    Gradients are averaged over each batch, the LR follows the one-cycle
    cosine schedule across all epochs, and training confusion counts are
    collected from the same forward passes that produce the loss.
    """
    if not dataset:
        raise InvalidArgumentError("training dataset is empty")
    model = model or build_model(strategy, model_cfg)
    params = model.named_parameters()
    opt = AdamW(params, train_cfg.lr_peak, train_cfg.beta1, train_cfg.beta2,
                train_cfg.weight_decay)
    if optimizer_state is not None:
        opt.load_state(*optimizer_state)
    gts = [encode(s.labels, strategy) for s in dataset]
    n = len(dataset)
    batches_per_epoch = (n + train_cfg.batch_size - 1) // train_cfg.batch_size
    total_steps = train_cfg.epochs * batches_per_epoch
    result = TrainResult(model=model, optimizer=opt)

    step = start_epoch * batches_per_epoch
    for epoch in range(start_epoch, train_cfg.epochs):
        rng = np.random.default_rng([train_cfg.seed, 301, epoch])
        order = rng.permutation(n)
        acc = ConfusionAccumulator(strategy)
        epoch_loss = 0.0
        lr = one_cycle_lr(step, total_steps, train_cfg.lr_peak,
                          train_cfg.div_start, train_cfg.div_final)
        for b in range(batches_per_epoch):
            batch = order[b * train_cfg.batch_size:(b + 1) * train_cfg.batch_size]
            model.zero_grad()
            batch_loss = 0.0
            for si in batch:
                scan_ = dataset[si]
                cloud = scan_.cloud
                if model_cfg.augment:
                    cloud = _augment_cloud(cloud, rng)
                logits = model(cloud.positions, cloud.normals)
                loss = multilayer_loss(logits, gts[si], train_cfg.class_weights)
                if not np.isfinite(loss.data):
                    raise TrainingDivergedError(epoch, b, lr)
                loss.backward()
                batch_loss += float(loss.data)
                pred = StrategyLabels(
                    strategy=strategy,
                    layers=tuple(np.argmax(lg.data, axis=1) for lg in logits),
                    class_counts=strategy.class_counts)
                accumulate(pred, gts[si], acc)
            for p in params.values():
                if p.grad is not None:
                    p.grad = p.grad / len(batch)
            lr = one_cycle_lr(step, total_steps, train_cfg.lr_peak,
                              train_cfg.div_start, train_cfg.div_final)
            opt.step(lr)
            step += 1
            epoch_loss += batch_loss
        row = {"epoch": epoch, "lr": lr,
               "loss": epoch_loss / n}
        for layer in range(len(strategy.class_counts)):
            row[f"miou_layer{layer + 1}"] = miou(acc, layer)
        row["train_avg_miou"] = avg_miou(acc)
        if val_dataset and (
                (epoch + 1) % max(train_cfg.eval_every, 1) == 0
                or epoch == train_cfg.epochs - 1):
            val_acc = evaluate(model, val_dataset, strategy)
            row["val_avg_miou"] = avg_miou(val_acc)
            if (result.best_val_avg_miou is None
                    or row["val_avg_miou"] > result.best_val_avg_miou):
                result.best_val_avg_miou = row["val_avg_miou"]
        result.log.append(row)
        result.final_epoch = epoch
        if on_epoch is not None:
            on_epoch(row)
        target = train_cfg.target_val_avg_miou
        if (target is not None and row.get("val_avg_miou") is not None
                and row["val_avg_miou"] >= target):
            break
        t_train = train_cfg.target_train_avg_miou
        if t_train is not None and row["train_avg_miou"] >= t_train:
            break
    return result
