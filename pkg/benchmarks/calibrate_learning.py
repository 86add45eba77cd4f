"""Calibration probe for the desk-scale learning target (not part of tests)."""

import time

import numpy as np

import clothlayers as cl
from clothlayers.layering import GarmentClass, Strategy
from clothlayers.nn import ModelConfig, TrainConfig, train
from clothlayers.scene import sample_outfit, sample_scene

UPPERS = (GarmentClass.LONG_SHIRT, GarmentClass.T_SHIRT, GarmentClass.TOP)
LOWERS = (GarmentClass.LONG_PANTS, GarmentClass.SHORTS, GarmentClass.SKIRT)


def make_dataset(n, seed, points=2048):
    rng = np.random.default_rng(seed)
    scans = []
    t0 = time.time()
    for i in range(n):
        up = UPPERS[i % 3]
        lo = LOWERS[(i // 3) % 3]
        band = float(rng.uniform(-0.05, 0.12))
        outfit = sample_outfit(up, lo, band, np.random.default_rng([seed, i]))
        scene = sample_scene(outfit, seed=seed * 1000 + i)
        s = cl.scan(scene, cl.ScanConfig(rays_per_view=900, seed=i,
                                         noise_sigma=0.002))
        scans.append(cl.resample(s, points, seed=i))
    print(f"dataset {n} scenes in {time.time() - t0:.1f}s")
    return scans


def main():
    train_set = make_dataset(64, seed=1)
    val_set = make_dataset(16, seed=2)
    cfg = ModelConfig(backbone="pt", feature_width=64, k_neighbors=16, seed=0)
    tc = TrainConfig(epochs=100, batch_size=8, seed=0, eval_every=2,
                     target_val_avg_miou=0.80)
    t0 = time.time()
    res = train(train_set, Strategy.S2, cfg, tc, val_dataset=val_set,
                on_epoch=lambda row: print(
                    f"epoch {row['epoch']:3d} loss {row['loss']:.4f} "
                    f"train {row['train_avg_miou']:.3f} "
                    f"val {row.get('val_avg_miou', float('nan')):.3f} "
                    f"[{time.time() - t0:6.1f}s]", flush=True))
    print(f"done: best val {res.best_val_avg_miou} "
          f"epochs {res.final_epoch + 1} time {time.time() - t0:.1f}s")


if __name__ == "__main__":
    main()
