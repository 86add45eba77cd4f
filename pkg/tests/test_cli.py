import json

import pytest

from clothlayers.cli import _apportion, main
from clothlayers.dataset import load_dataset, load_manifest, split_by_hash
from clothlayers.plyio import read_ply


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "ds"
    rc = main(["gen", "--out", str(out), "--scenes", "9", "--points", "256",
               "--rays-per-view", "300", "--seed", "5"])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, dataset_dir):
    out = tmp_path_factory.mktemp("run") / "r"
    rc = main(["train", "--data", str(dataset_dir), "--out", str(out),
               "--strategy", "s2", "--backbone", "pt", "--epochs", "2",
               "--batch-size", "4", "--seed", "1"])
    assert rc == 0
    return out


class TestApportion:
    def test_uniform_within_one(self):
        counts = _apportion(90, [1.0] * 9)
        assert counts == [10] * 9
        counts = _apportion(20, [1.0] * 9)
        assert max(counts) - min(counts) <= 1
        assert sum(counts) == 20

    def test_weighted_matches_rounding(self):
        counts = _apportion(81, [504, 310])
        assert sum(counts) == 81
        assert counts[0] == round(81 * 504 / 814)


class TestGen:
    def test_manifest_lists_every_scene(self, dataset_dir):
        manifest = load_manifest(dataset_dir)
        assert len(manifest["scenes"]) == 9
        for entry in manifest["scenes"]:
            assert (dataset_dir / entry["file"]).exists()
            assert entry["point_count"] == 256
            assert {"upper", "lower", "overlap_band_m", "pose_seed",
                    "shape_seed"} <= set(entry)
        assert manifest["version"]
        assert manifest["config_hash"]

    def test_balanced_combinations(self, dataset_dir):
        manifest = load_manifest(dataset_dir)
        combos = {}
        for e in manifest["scenes"]:
            combos[(e["upper"], e["lower"])] = combos.get(
                (e["upper"], e["lower"]), 0) + 1
        assert len(combos) == 9
        assert all(v == 1 for v in combos.values())

    def test_regeneration_is_byte_identical(self, dataset_dir, tmp_path):
        out2 = tmp_path / "again"
        assert main(["gen", "--out", str(out2), "--scenes", "9", "--points",
                     "256", "--rays-per-view", "300", "--seed", "5"]) == 0
        m1 = (dataset_dir / "manifest.json").read_bytes()
        m2 = (out2 / "manifest.json").read_bytes()
        assert m1 == m2
        for entry in load_manifest(dataset_dir)["scenes"]:
            assert ((dataset_dir / entry["file"]).read_bytes()
                    == (out2 / entry["file"]).read_bytes())

    def test_weighted_generation(self, tmp_path):
        out = tmp_path / "weighted"
        cfg = tmp_path / "gen.json"
        cfg.write_text(json.dumps({
            "weights": {"t-shirt+trousers": 504, "top+skirt": 310},
            "rays_per_view": 200, "points": 128,
        }))
        assert main(["gen", "--out", str(out), "--scenes", "8",
                     "--config", str(cfg), "--seed", "2"]) == 0
        manifest = load_manifest(out)
        combos = {}
        for e in manifest["scenes"]:
            key = (e["upper"], e["lower"])
            combos[key] = combos.get(key, 0) + 1
        assert set(combos) == {("t-shirt", "long-pants"), ("top", "skirt")}
        assert combos[("t-shirt", "long-pants")] == round(8 * 504 / 814)

    def test_class_codes_sidecar(self, dataset_dir):
        codes = json.loads((dataset_dir / "class_codes.json").read_text())
        assert codes["garment_classes"]["long-pants"] == 3
        assert codes["strategies"]["s5"]["layer2"]["6"] == "skirt"


class TestSplit:
    def test_disjoint_and_deterministic(self, dataset_dir):
        names, _ = load_dataset(dataset_dir)
        tr, va = split_by_hash(names, 0.25, seed=1)
        tr2, va2 = split_by_hash(names, 0.25, seed=1)
        assert tr == tr2 and va == va2
        assert set(tr).isdisjoint(va)
        assert len(tr) + len(va) == len(names)
        assert len(va) == round(0.25 * len(names))


class TestTrain:
    def test_outputs_exist(self, run_dir):
        assert (run_dir / "checkpoint.clwb").exists()
        assert (run_dir / "metrics.csv").exists()
        resolved = json.loads((run_dir / "config.resolved.json").read_text())
        assert resolved["strategy"] == "s2"
        assert set(resolved["train_files"]).isdisjoint(resolved["val_files"])

    def test_metrics_log_columns(self, run_dir):
        header = (run_dir / "metrics.csv").read_text().splitlines()[0]
        for col in ("epoch", "lr", "loss", "miou_layer1", "miou_layer2",
                    "miou_layer3"):
            assert col in header

    def test_resume_continues_numbering(self, dataset_dir, run_dir, tmp_path):
        out = tmp_path / "resumed"
        rc = main(["train", "--data", str(dataset_dir), "--out", str(out),
                   "--strategy", "s2", "--epochs", "4", "--batch-size", "4",
                   "--seed", "1",
                   "--resume", str(run_dir / "checkpoint.clwb")])
        assert rc == 0
        rows = (out / "metrics.csv").read_text().splitlines()[1:]
        epochs = [int(r.split(",")[0]) for r in rows]
        assert epochs == [2, 3]


class TestEval:
    def test_eval_writes_reports(self, dataset_dir, run_dir, tmp_path):
        out = tmp_path / "eval"
        rc = main(["eval", "--checkpoint", str(run_dir / "checkpoint.clwb"),
                   "--data", str(dataset_dir), "--out", str(out)])
        assert rc == 0
        rep = json.loads((out / "report.json").read_text())
        assert rep["strategy"] == "s2"
        assert "avg_miou" in rep and len(rep["layers"]) == 3
        assert "inconsistencies" in rep
        text = (out / "report.txt").read_text()
        assert "avg mIoU" in text

    def test_wrong_strategy_rejected(self, dataset_dir, run_dir, tmp_path):
        rc = main(["eval", "--checkpoint", str(run_dir / "checkpoint.clwb"),
                   "--data", str(dataset_dir), "--out",
                   str(tmp_path / "x"), "--strategy", "s5"])
        assert rc == 2

    def test_gt_as_prediction_is_perfect(self, dataset_dir):
        # feeding the ground truth through the metrics path yields IoU 1.0
        from clothlayers.layering import Strategy, encode
        from clothlayers.metrics import (ConfusionAccumulator, accumulate,
                                         avg_miou)
        _, scans = load_dataset(dataset_dir)
        acc = ConfusionAccumulator(Strategy.S2)
        for s in scans:
            gt = encode(s.labels, Strategy.S2)
            accumulate(gt, gt, acc)
        assert avg_miou(acc) == 1.0


class TestExport:
    def test_layer_files_and_palette(self, dataset_dir, run_dir, tmp_path):
        out = tmp_path / "export"
        rc = main(["export", "--checkpoint", str(run_dir / "checkpoint.clwb"),
                   "--scan", str(dataset_dir / "scene_0000.ply"),
                   "--out", str(out)])
        assert rc == 0
        files = sorted(p.name for p in out.glob("*_pred.ply"))
        assert len(files) == 3
        gt_files = sorted(p.name for p in out.glob("*_gt.ply"))
        assert len(gt_files) == 3
        props, _ = read_ply(out / files[0])
        assert len(props["x"]) == 256
        from clothlayers.cli import PALETTE
        rgb = set(zip(props["red"].tolist(), props["green"].tolist(),
                      props["blue"].tolist()))
        assert rgb <= set(PALETTE)

    def test_palette_stable_across_runs(self, dataset_dir, run_dir, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for out in (a, b):
            assert main(["export", "--checkpoint",
                         str(run_dir / "checkpoint.clwb"),
                         "--scan", str(dataset_dir / "scene_0001.ply"),
                         "--out", str(out)]) == 0
        fa = sorted(a.glob("*.ply"))[0]
        fb = sorted(b.glob("*.ply"))[0]
        assert fa.read_bytes() == fb.read_bytes()


class TestExitCodes:
    def test_missing_dataset_is_invalid_argument(self, tmp_path):
        rc = main(["train", "--data", str(tmp_path / "nope"),
                   "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_bad_config_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"not_a_key": 1}))
        rc = main(["gen", "--out", str(tmp_path / "d"), "--config", str(cfg)])
        assert rc == 2
