import numpy as np
import pytest

from clothlayers.errors import InvalidArgumentError
from clothlayers.layering import Strategy, StrategyLabels
from clothlayers.metrics import (ConfusionAccumulator, accumulate, avg_miou,
                                 iou, macc_allacc, miou, report)

from reference_counts import REFERENCE_MATRICES


def s2_labels(l1, l2, l3):
    return StrategyLabels(strategy=Strategy.S2,
                          layers=(np.asarray(l1), np.asarray(l2),
                                  np.asarray(l3)),
                          class_counts=Strategy.S2.class_counts)


def random_labels(rng, strategy, n):
    layers = tuple(rng.integers(0, c, size=n)
                   for c in strategy.class_counts)
    return StrategyLabels(strategy=strategy, layers=layers,
                          class_counts=strategy.class_counts)


def set_oracle(pred, gt, n_classes):
    """Brute-force per-class counts from python sets."""
    out = []
    for c in range(n_classes):
        p = {i for i, v in enumerate(pred) if v == c}
        g = {i for i, v in enumerate(gt) if v == c}
        out.append((len(p & g), len(p - g), len(g - p)))
    return out


class TestAccumulate:
    def test_perfect_prediction(self):
        rng = np.random.default_rng(0)
        gt = random_labels(rng, Strategy.S2, 100)
        acc = ConfusionAccumulator(Strategy.S2)
        accumulate(gt, gt, acc)
        for layer in range(3):
            assert acc.correct_points(layer) == 100
            for c in range(2):
                assert acc.fp(layer, c) == 0
                assert acc.fn(layer, c) == 0

    def test_hand_counts(self):
        gt = s2_labels([1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0])
        pred = s2_labels([1, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0])
        acc = ConfusionAccumulator(Strategy.S2)
        accumulate(pred, gt, acc)
        assert (acc.tp(0, 1), acc.fp(0, 1), acc.fn(0, 1)) == (1, 1, 0)
        assert (acc.tp(0, 0), acc.fp(0, 0), acc.fn(0, 0)) == (2, 0, 1)

    def test_batches_equal_concatenation(self):
        rng = np.random.default_rng(1)
        gt = random_labels(rng, Strategy.S3, 200)
        pred = random_labels(rng, Strategy.S3, 200)
        whole = ConfusionAccumulator(Strategy.S3)
        accumulate(pred, gt, whole)
        half = ConfusionAccumulator(Strategy.S3)
        for sl in (slice(0, 100), slice(100, 200)):
            accumulate(
                StrategyLabels(Strategy.S3,
                               tuple(l[sl] for l in pred.layers),
                               Strategy.S3.class_counts),
                StrategyLabels(Strategy.S3,
                               tuple(l[sl] for l in gt.layers),
                               Strategy.S3.class_counts),
                half)
        for a, b in zip(whole.matrices, half.matrices):
            np.testing.assert_array_equal(a, b)

    def test_merge_equals_serial(self):
        rng = np.random.default_rng(2)
        gt1 = random_labels(rng, Strategy.S1, 50)
        pr1 = random_labels(rng, Strategy.S1, 50)
        gt2 = random_labels(rng, Strategy.S1, 70)
        pr2 = random_labels(rng, Strategy.S1, 70)
        a = ConfusionAccumulator(Strategy.S1)
        accumulate(pr1, gt1, a)
        b = ConfusionAccumulator(Strategy.S1)
        accumulate(pr2, gt2, b)
        serial = ConfusionAccumulator(Strategy.S1)
        accumulate(pr1, gt1, serial)
        accumulate(pr2, gt2, serial)
        np.testing.assert_array_equal(a.merge(b).matrices[0],
                                      serial.matrices[0])

    def test_length_mismatch_rejected(self):
        rng = np.random.default_rng(3)
        with pytest.raises(InvalidArgumentError):
            accumulate(random_labels(rng, Strategy.S2, 5),
                       random_labels(rng, Strategy.S2, 6),
                       ConfusionAccumulator(Strategy.S2))


class TestIoU:
    def test_basic_ratio(self):
        gt = s2_labels([1, 0], [0, 0], [0, 0])
        pred = s2_labels([1, 1], [0, 0], [0, 0])
        acc = ConfusionAccumulator(Strategy.S2)
        accumulate(pred, gt, acc)
        assert iou(acc, 0, 1) == 0.5

    def test_perfect_is_one(self):
        gt = s2_labels([1] * 100, [0] * 100, [1] * 100)
        acc = ConfusionAccumulator(Strategy.S2)
        accumulate(gt, gt, acc)
        assert iou(acc, 0, 1) == 1.0

    def test_absent_class_undefined(self):
        gt = s2_labels([0, 0], [0, 0], [0, 0])
        acc = ConfusionAccumulator(Strategy.S2)
        accumulate(gt, gt, acc)
        assert iou(acc, 0, 1) is None
        assert miou(acc, 0) == 1.0  # class 0 only

    def test_predicted_only_class_counts(self):
        # class present only in predictions still has a defined (zero) IoU
        gt = s2_labels([0, 0], [0, 0], [0, 0])
        pred = s2_labels([1, 0], [0, 0], [0, 0])
        acc = ConfusionAccumulator(Strategy.S2)
        accumulate(pred, gt, acc)
        assert iou(acc, 0, 1) == 0.0
        assert iou(acc, 0, 0) == 0.5
        assert miou(acc, 0) == pytest.approx(0.25)

    def test_macc_allacc_hand_example(self):
        gt = s2_labels([1, 0, 0, 0], [0] * 4, [0] * 4)
        pred = s2_labels([1, 1, 0, 0], [0] * 4, [0] * 4)
        acc = ConfusionAccumulator(Strategy.S2)
        accumulate(pred, gt, acc)
        macc, allacc = macc_allacc(acc, 0)
        assert macc == pytest.approx(5 / 6)
        assert allacc == pytest.approx(3 / 4)

    def test_iou_never_exceeds_class_accuracy(self):
        rng = np.random.default_rng(4)
        gt = random_labels(rng, Strategy.S5, 2000)
        pred = random_labels(rng, Strategy.S5, 2000)
        acc = ConfusionAccumulator(Strategy.S5)
        accumulate(pred, gt, acc)
        for layer, count in enumerate(Strategy.S5.class_counts):
            for c in range(count):
                tp, fn = acc.tp(layer, c), acc.fn(layer, c)
                if tp + fn == 0:
                    continue
                v = iou(acc, layer, c)
                assert v is not None and v <= tp / (tp + fn) + 1e-12

    def test_permutation_invariance(self):
        rng = np.random.default_rng(5)
        gt = random_labels(rng, Strategy.S4, 300)
        pred = random_labels(rng, Strategy.S4, 300)
        perm = rng.permutation(300)
        a = ConfusionAccumulator(Strategy.S4)
        accumulate(pred, gt, a)
        b = ConfusionAccumulator(Strategy.S4)
        accumulate(
            StrategyLabels(Strategy.S4, tuple(l[perm] for l in pred.layers),
                           Strategy.S4.class_counts),
            StrategyLabels(Strategy.S4, tuple(l[perm] for l in gt.layers),
                           Strategy.S4.class_counts), b)
        assert avg_miou(a) == avg_miou(b)


class TestAverages:
    def test_single_layer_avg_is_miou(self):
        rng = np.random.default_rng(6)
        gt = random_labels(rng, Strategy.S1, 100)
        acc = ConfusionAccumulator(Strategy.S1)
        accumulate(gt, gt, acc)
        assert avg_miou(acc) == miou(acc, 0)

    def test_published_layer_mious_average(self):
        # mean(71.5, 97.8, 97.9) = 89.07, which displays as 89.0/89.1
        assert np.mean([0.715, 0.978, 0.979]) == pytest.approx(0.890, abs=1e-3)

    def test_reference_row_from_stored_counts(self):
        acc = ConfusionAccumulator.from_matrices(Strategy.S2,
                                                 REFERENCE_MATRICES)
        shown = [round(100 * miou(acc, l), 1) for l in range(3)]
        assert shown == [71.5, 97.8, 97.9]
        assert abs(100 * avg_miou(acc) - 89.0) <= 0.05


class TestOracle:
    @pytest.mark.parametrize("strategy", list(Strategy))
    def test_counts_match_set_oracle(self, strategy):
        rng = np.random.default_rng(hash(strategy.value) % 2 ** 31)
        for trial in range(10):
            gt = random_labels(rng, strategy, 1000)
            pred = random_labels(rng, strategy, 1000)
            acc = ConfusionAccumulator(strategy)
            accumulate(pred, gt, acc)
            for layer, count in enumerate(strategy.class_counts):
                want = set_oracle(pred.layers[layer].tolist(),
                                  gt.layers[layer].tolist(), count)
                for c, (tp, fp, fn) in enumerate(want):
                    assert acc.tp(layer, c) == tp
                    assert acc.fp(layer, c) == fp
                    assert acc.fn(layer, c) == fn
                    denom = tp + fp + fn
                    expect = None if denom == 0 else tp / denom
                    assert iou(acc, layer, c) == expect


class TestReports:
    def test_s1_report_columns(self):
        rng = np.random.default_rng(7)
        gt = random_labels(rng, Strategy.S1, 500)
        acc = ConfusionAccumulator(Strategy.S1)
        accumulate(gt, gt, acc)
        text = report(acc, row_label="probe").to_text()
        for col in ("mIoU", "mAcc", "allAcc", "other", "upper", "overlap",
                    "lower"):
            assert col in text

    def test_s2_report_layout_and_json(self):
        acc = ConfusionAccumulator.from_matrices(Strategy.S2,
                                                 REFERENCE_MATRICES)
        rep = report(acc, row_label="reference")
        text = rep.to_text()
        assert " 71.5" in text and " 97.8" in text and " 97.9" in text
        assert " 89.0" in text
        d = rep.to_dict()
        assert set(d["layers"][0]["iou"]) == {"no-body", "body"}
        assert set(d["layers"][1]["iou"]) == {"other", "upper"}

    def test_s5_report_column_order(self):
        rng = np.random.default_rng(8)
        gt = random_labels(rng, Strategy.S5, 800)
        acc = ConfusionAccumulator(Strategy.S5)
        accumulate(gt, gt, acc)
        text = report(acc).to_text()
        header = text.splitlines()[0]
        i_ts = header.index("t-shirt")
        i_sh = header.index("shorts")
        i_lp = header.index("long-pants")
        assert i_ts < i_sh < i_lp
