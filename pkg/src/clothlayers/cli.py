"""Command-line harness: gen, train, eval, export.

Runs are reproducible: every command resolves its configuration (file values
overridden by flags), embeds the toolkit version plus the config hash in its
artifacts, and derives all randomness from the recorded seeds.

Exit codes: 0 ok, 2 invalid argument, 3 I/O error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (config_hash, load_dataset, save_manifest,
                      split_by_hash, write_class_codes)
from .errors import (ClothLayersError, EmptyScanError, InvalidArgumentError,
                     SceneGenerationError, TrainingDivergedError)
from .layering import (GarmentClass, Strategy, decode, encode, parse_garment,
                       parse_strategy)
from .metrics import ConfusionAccumulator, accumulate, report
from .nn import (ModelConfig, TrainConfig, build_model, load_checkpoint,
                 predict, save_checkpoint, train)
from .plyio import read_labeled_scan, write_labeled_scan, write_ply
from .scanner import ScanConfig, resample, scan
from .scene import SceneSpec, scene_from_spec

UPPERS = (GarmentClass.LONG_SHIRT, GarmentClass.T_SHIRT, GarmentClass.TOP)
LOWERS = (GarmentClass.LONG_PANTS, GarmentClass.SHORTS, GarmentClass.SKIRT)

# fixed per-code palette for exported layers (code -> RGB)
PALETTE = (
    (180, 180, 180),
    (228, 26, 28),
    (55, 126, 184),
    (77, 175, 74),
    (152, 78, 163),
    (255, 127, 0),
    (255, 217, 47),
)


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise InvalidArgumentError(f"config file {path} not found")
    raw = json.loads(p.read_text())
    if not isinstance(raw, dict):
        raise InvalidArgumentError("config file must hold a JSON object")
    return raw


def _resolve(file_cfg: dict, defaults: dict, overrides: dict) -> dict:
    """defaults < config file < explicit CLI flags."""
    out = dict(defaults)
    for k, v in file_cfg.items():
        if k not in defaults:
            raise InvalidArgumentError(f"unknown config key {k!r}")
        out[k] = v
    for k, v in overrides.items():
        if v is not None:
            out[k] = v
    return out


def _apportion(total: int, weights: list[float]) -> list[int]:
    """Largest-remainder apportionment; uniform weights stay within +-1."""
    ideal = [total * w / sum(weights) for w in weights]
    counts = [int(x) for x in ideal]
    rema = sorted(range(len(weights)), key=lambda i: (ideal[i] - counts[i], -i),
                  reverse=True)
    for i in rema[: total - sum(counts)]:
        counts[i] += 1
    return counts


# --- gen -------------------------------------------------------------------

_GEN_DEFAULTS = {
    "scenes": 18,
    "points": 2048,
    "rays_per_view": 900,
    "num_views": 13,
    "noise_sigma": 0.002,
    "band_min": -0.05,
    "band_max": 0.12,
    "seed": 0,
    "weights": None,       # {"t-shirt+long-pants": 504, ...}
    "ascii": False,
}


def cmd_gen(args) -> int:
    cfg = _resolve(_load_config_file(args.config), _GEN_DEFAULTS, {
        "scenes": args.scenes, "points": args.points,
        "rays_per_view": args.rays_per_view, "noise_sigma": args.noise_sigma,
        "seed": args.seed, "band_min": args.band_min, "band_max": args.band_max,
    })
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    combos = list(itertools.product(UPPERS, LOWERS))
    if cfg["weights"]:
        weights = []
        for up, lo in combos:
            key = None
            for k in cfg["weights"]:
                u, _, l = k.partition("+")
                if parse_garment(u) is up and parse_garment(l) is lo:
                    key = k
                    break
            weights.append(float(cfg["weights"][key]) if key else 0.0)
    else:
        weights = [1.0] * len(combos)
    counts = _apportion(int(cfg["scenes"]), weights)

    entries = []
    root = np.random.SeedSequence(int(cfg["seed"]))
    children = root.spawn(int(cfg["scenes"]))
    index = 0
    for (up, lo), count in zip(combos, counts):
        for _ in range(count):
            child = children[index]
            pose_seed, shape_seed, scan_seed, band_seed = (
                int(x) for x in child.generate_state(4))
            band_rng = np.random.default_rng(band_seed)
            band = float(band_rng.uniform(cfg["band_min"], cfg["band_max"]))
            spec = SceneSpec(upper=up.label, lower=lo.label,
                             overlap_band_m=round(band, 6),
                             pose_seed=pose_seed, shape_seed=shape_seed)
            scene = scene_from_spec(spec)
            scan_cfg = ScanConfig(num_views=int(cfg["num_views"]),
                                  rays_per_view=int(cfg["rays_per_view"]),
                                  noise_sigma=float(cfg["noise_sigma"]),
                                  seed=scan_seed)
            labeled = resample(scan(scene, scan_cfg), int(cfg["points"]),
                               seed=scan_seed)
            name = f"scene_{index:04d}.ply"
            write_labeled_scan(out / name, labeled,
                               comments=[f"clothlayers {__version__}",
                                         f"scene_spec {spec.to_json()}".replace("\n", " ")],
                               binary=not cfg["ascii"])
            entries.append({
                "file": name, "upper": up.label, "lower": lo.label,
                "overlap_band_m": spec.overlap_band_m,
                "pose_seed": pose_seed, "shape_seed": shape_seed,
                "scan_seed": scan_seed, "point_count": len(labeled),
                "retries": scene.meta.retries,
            })
            index += 1
    save_manifest(out, entries, cfg, int(cfg["seed"]))
    write_class_codes(out)
    print(f"gen: wrote {index} scenes to {out}")
    return 0


# --- train -------------------------------------------------------------------

_TRAIN_DEFAULTS = {
    "strategy": "s2",
    "backbone": "pt",
    "feature_width": 64,
    "k_neighbors": 16,
    "depth": 2,
    "augment": False,
    "epochs": 60,
    "batch_size": 8,
    "lr_peak": 0.005,
    "weight_decay": 0.01,
    "val_fraction": 0.2,
    "eval_every": 5,
    "seed": 0,
    "target_val_avg_miou": None,
}


def _write_log(path: Path, rows: list[dict]) -> None:
    cols: list[str] = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)


def cmd_train(args) -> int:
    cfg = _resolve(_load_config_file(args.config), _TRAIN_DEFAULTS, {
        "strategy": args.strategy, "backbone": args.backbone,
        "epochs": args.epochs, "batch_size": args.batch_size,
        "lr_peak": args.lr_peak, "seed": args.seed,
        "val_fraction": args.val_fraction,
        "augment": True if args.augment else None,
        "target_val_avg_miou": args.target_val_avg_miou,
        "feature_width": args.feature_width,
    })
    strategy = parse_strategy(cfg["strategy"])
    names, scans = load_dataset(args.data)
    if not scans:
        raise InvalidArgumentError(f"dataset {args.data} is empty")
    train_names, val_names = split_by_hash(names, float(cfg["val_fraction"]),
                                           int(cfg["seed"]))
    by_name = dict(zip(names, scans))
    train_set = [by_name[n] for n in train_names]
    val_set = [by_name[n] for n in val_names]

    model_cfg = ModelConfig(
        backbone=cfg["backbone"], feature_width=int(cfg["feature_width"]),
        depth=int(cfg["depth"]), k_neighbors=int(cfg["k_neighbors"]),
        augment=bool(cfg["augment"]), seed=int(cfg["seed"]))
    train_cfg = TrainConfig(
        epochs=int(cfg["epochs"]), batch_size=int(cfg["batch_size"]),
        lr_peak=float(cfg["lr_peak"]), weight_decay=float(cfg["weight_decay"]),
        seed=int(cfg["seed"]), eval_every=int(cfg["eval_every"]),
        target_val_avg_miou=cfg["target_val_avg_miou"])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    resolved = dict(cfg)
    resolved["train_files"] = train_names
    resolved["val_files"] = val_names
    chash = config_hash(resolved)

    model = None
    start_epoch = 0
    opt_state = None
    if args.resume:
        meta, tensors = load_checkpoint(args.resume)
        if meta["strategy"] != strategy.value:
            raise InvalidArgumentError(
                f"checkpoint strategy {meta['strategy']} != {strategy.value}")
        model_cfg = ModelConfig.from_dict(meta["model_config"])
        model = build_model(strategy, model_cfg)
        model.load_state({k: v for k, v in tensors.items()
                          if not k.startswith("opt.")})
        opt_tensors = {k: v for k, v in tensors.items() if k.startswith("opt.")}
        if opt_tensors:
            opt_state = (opt_tensors, int(meta["opt_step"]))
        start_epoch = int(meta["epoch"]) + 1

    result = train(train_set, strategy, model_cfg, train_cfg,
                   val_dataset=val_set or None, model=model,
                   start_epoch=start_epoch, optimizer_state=opt_state,
                   on_epoch=lambda row: print(
                       f"epoch {row['epoch']:3d} lr {row['lr']:.5f} "
                       f"loss {row['loss']:.4f} train {row['train_avg_miou']:.3f}"
                       + (f" val {row['val_avg_miou']:.3f}"
                          if 'val_avg_miou' in row else "")))

    tensors = result.model.state()
    tensors.update(result.optimizer.state())
    meta = {
        "version": __version__, "config_hash": chash,
        "strategy": strategy.value, "model_config": model_cfg.to_dict(),
        "train_config": train_cfg.to_dict(), "epoch": result.final_epoch,
        "opt_step": result.optimizer.step_count,
    }
    save_checkpoint(out / "checkpoint.clwb", tensors, meta)
    _write_log(out / "metrics.csv", result.log)
    (out / "config.resolved.json").write_text(
        json.dumps({"version": __version__, "config_hash": chash,
                    **resolved}, indent=2, sort_keys=True))
    write_class_codes(out)
    best = result.best_val_avg_miou
    print(f"train: {result.final_epoch + 1} epochs, "
          f"best val avg mIoU {best:.4f}" if best is not None else
          f"train: {result.final_epoch + 1} epochs")
    return 0


# --- eval -------------------------------------------------------------------

def cmd_eval(args) -> int:
    meta, tensors = load_checkpoint(args.checkpoint)
    strategy = parse_strategy(args.strategy or meta["strategy"])
    if strategy.value != meta["strategy"]:
        raise InvalidArgumentError(
            f"checkpoint was trained for {meta['strategy']}, not {strategy.value}")
    model_cfg = ModelConfig.from_dict(meta["model_config"])
    model = build_model(strategy, model_cfg)
    model.load_state({k: v for k, v in tensors.items()
                      if not k.startswith("opt.")})
    names, scans = load_dataset(args.data)
    if args.split != "all":
        val_fraction = float(args.val_fraction)
        tr, va = split_by_hash(names, val_fraction, int(meta["train_config"]["seed"]))
        keep = set(va if args.split == "val" else tr)
        scans = [s for n, s in zip(names, scans) if n in keep]
    acc = ConfusionAccumulator(strategy)
    inconsistencies = 0
    for s in scans:
        pred = predict(model, s)
        inconsistencies += decode(pred).inconsistencies
        accumulate(pred, encode(s.labels, strategy), acc)
    rep = report(acc, row_label=f"{model_cfg.backbone}"
                 + (" aug" if model_cfg.augment else ""),
                 inconsistencies=inconsistencies)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(rep.to_text() + "\n")
    payload = rep.to_dict()
    payload["version"] = __version__
    payload["config_hash"] = meta["config_hash"]
    (out / "report.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True))
    write_class_codes(out)
    print(rep.to_text())
    return 0


# --- export -------------------------------------------------------------------

def _color_ply(path: Path, positions: np.ndarray, codes: np.ndarray,
               comments: list[str]) -> None:
    rgb = np.array([PALETTE[c % len(PALETTE)] for c in codes], dtype=np.uint8)
    write_ply(path, [
        ("x", "float", positions[:, 0]),
        ("y", "float", positions[:, 1]),
        ("z", "float", positions[:, 2]),
        ("red", "uchar", rgb[:, 0]),
        ("green", "uchar", rgb[:, 1]),
        ("blue", "uchar", rgb[:, 2]),
        ("label", "char", codes.astype(np.int8)),
    ], comments=comments)


def cmd_export(args) -> int:
    meta, tensors = load_checkpoint(args.checkpoint)
    strategy = parse_strategy(args.strategy or meta["strategy"])
    if strategy.value != meta["strategy"]:
        raise InvalidArgumentError(
            f"checkpoint was trained for {meta['strategy']}, not {strategy.value}")
    model_cfg = ModelConfig.from_dict(meta["model_config"])
    model = build_model(strategy, model_cfg)
    model.load_state({k: v for k, v in tensors.items()
                      if not k.startswith("opt.")})
    labeled = read_labeled_scan(args.scan)
    pred = predict(model, labeled)
    gt = encode(labeled.labels, strategy)
    if len(pred) != len(labeled):
        raise InvalidArgumentError("prediction and scan lengths differ")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    comments = [f"clothlayers {__version__}",
                f"config {meta['config_hash']}",
                f"strategy {strategy.value}"]
    pos = labeled.cloud.positions
    stem = Path(args.scan).stem
    for layer in range(strategy.num_layers):
        _color_ply(out / f"{stem}_{strategy.value}_layer{layer + 1}_pred.ply",
                   pos, pred.layers[layer], comments)
        _color_ply(out / f"{stem}_{strategy.value}_layer{layer + 1}_gt.ply",
                   pos, gt.layers[layer], comments)
    write_class_codes(out)
    print(f"export: wrote {2 * strategy.num_layers} layer files to {out}")
    return 0


# --- entry point -------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="clothlayers",
        description="Synthetic clothed-human scans, multi-layer segmentation "
                    "strategies, training and evaluation.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a labeled scan dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--config")
    g.add_argument("--scenes", type=int)
    g.add_argument("--points", type=int)
    g.add_argument("--rays-per-view", dest="rays_per_view", type=int)
    g.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    g.add_argument("--band-min", dest="band_min", type=float)
    g.add_argument("--band-max", dest="band_max", type=float)
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train a multi-head segmenter")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config")
    t.add_argument("--strategy", choices=[s.value for s in Strategy])
    t.add_argument("--backbone", choices=["set", "edge", "pt"])
    t.add_argument("--feature-width", dest="feature_width", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--batch-size", dest="batch_size", type=int)
    t.add_argument("--lr-peak", dest="lr_peak", type=float)
    t.add_argument("--val-fraction", dest="val_fraction", type=float)
    t.add_argument("--augment", action="store_true", default=None)
    t.add_argument("--target-val-avg-miou", dest="target_val_avg_miou",
                   type=float)
    t.add_argument("--seed", type=int)
    t.add_argument("--resume")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--strategy", choices=[s.value for s in Strategy])
    e.add_argument("--split", choices=["all", "train", "val"], default="all")
    e.add_argument("--val-fraction", dest="val_fraction", default=0.2)
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("export", help="export colored per-layer predictions")
    x.add_argument("--checkpoint", required=True)
    x.add_argument("--scan", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--strategy", choices=[s.value for s in Strategy])
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except (TrainingDivergedError, SceneGenerationError, EmptyScanError,
            FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except ClothLayersError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
