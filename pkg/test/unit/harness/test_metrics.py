import numpy
import pandas
import pytest
from numpy.testing import assert_allclose

from surfeat.exceptions import InvalidArgumentError, InvalidDataError
from surfeat.harness.metrics import MetricReport, metrics_classification, metrics_segmentation


def _confusion_oracle(predictions, targets):
    counts = numpy.zeros((2, 2))
    for predicted, target in zip(predictions, targets):
        counts[target, predicted] += 1
    return counts


def _safe(numerator, denominator):
    return numerator / denominator if denominator else float("nan")


def test_metrics_classification__perfect():
    labels = [0, 0, 1, 1, 0]
    assert metrics_classification(labels, labels) == {"V": 1.0, "A": 1.0, "F1": 1.0}


def test_metrics_classification__hand_counts():
    # TP=8, FP=2, FN=2, TN=88
    targets = [1] * 10 + [0] * 90
    predictions = [1] * 8 + [0] * 2 + [1] * 2 + [0] * 88
    metrics = metrics_classification(predictions, targets)
    assert metrics["F1"] == pytest.approx(0.8)
    assert metrics["A"] == pytest.approx(0.8)
    assert metrics["V"] == pytest.approx(88 / 90)


def test_metrics_classification__all_negative_predictor():
    targets = [0] * 90 + [1] * 10
    metrics = metrics_classification([0] * 100, targets)
    assert metrics == {"V": 1.0, "A": 0.0, "F1": 0.0}


def test_metrics_classification__empty_class_undefined():
    metrics = metrics_classification([0, 1, 0], [0, 0, 0])
    assert numpy.isnan(metrics["A"])
    assert metrics["V"] == pytest.approx(2 / 3)
    assert metrics["F1"] == 0.0


def test_metrics_classification__matches_confusion_oracle():
    rng = numpy.random.default_rng(0)
    for _ in range(1000):
        size = int(rng.integers(1, 30))
        predictions = rng.integers(0, 2, size)
        targets = rng.integers(0, 2, size)
        counts = _confusion_oracle(predictions, targets)
        (tn, fp), (fn, tp) = counts
        precision = _safe(tp, tp + fp)
        recall = _safe(tp, tp + fn)
        precision = 0.0 if numpy.isnan(precision) else precision
        recall = 0.0 if numpy.isnan(recall) else recall
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        metrics = metrics_classification(predictions, targets)
        assert_allclose(
            [metrics["V"], metrics["A"], metrics["F1"]],
            [_safe(tn, tn + fp), _safe(tp, tp + fn), f1],
            equal_nan=True,
        )


def test_metrics_classification__rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        metrics_classification([0, 1], [0])
    with pytest.raises(InvalidDataError):
        metrics_classification([0, 2], [0, 1])


def test_metrics_segmentation__hand_counts():
    targets = numpy.zeros(200, dtype=int)
    targets[:90] = 1
    predictions = numpy.zeros(200, dtype=int)
    predictions[40:100] = 1
    metrics = metrics_segmentation(predictions, targets)
    assert metrics["IoU_A"] == pytest.approx(0.5)
    assert metrics["DSC_A"] == pytest.approx(2 * 50 / 150)
    # vessel: |P|=140, |T|=110, overlap 100
    assert metrics["IoU_V"] == pytest.approx(100 / 150)
    assert metrics["DSC_V"] == pytest.approx(200 / 250)


def test_metrics_segmentation__identical_and_disjoint():
    mask = numpy.array([0, 1, 1, 0, 1])
    identical = metrics_segmentation(mask, mask)
    assert identical == {"IoU_V": 1.0, "IoU_A": 1.0, "DSC_V": 1.0, "DSC_A": 1.0}
    disjoint = metrics_segmentation(1 - mask, mask)
    assert disjoint == {"IoU_V": 0.0, "IoU_A": 0.0, "DSC_V": 0.0, "DSC_A": 0.0}


def test_metrics_segmentation__absent_class_undefined():
    metrics = metrics_segmentation([0, 0, 0], [0, 0, 0])
    assert metrics["IoU_V"] == 1.0
    assert numpy.isnan(metrics["IoU_A"])
    assert numpy.isnan(metrics["DSC_A"])


def test_metrics_segmentation__micro_and_macro():
    predictions = [numpy.array([1, 1, 0, 0]), numpy.array([1, 0, 0, 0, 0, 0, 0, 0])]
    targets = [numpy.array([1, 0, 0, 0]), numpy.array([1, 1, 1, 0, 0, 0, 0, 0])]
    micro = metrics_segmentation(predictions, targets)
    macro = metrics_segmentation(predictions, targets, average="macro")
    # pooled: |P_A|=3, |T_A|=4, overlap 2
    assert micro["IoU_A"] == pytest.approx(2 / 5)
    assert macro["IoU_A"] == pytest.approx((1 / 2 + 1 / 3) / 2)
    with pytest.raises(InvalidArgumentError):
        metrics_segmentation(predictions, targets, average="weighted")
    with pytest.raises(InvalidArgumentError):
        metrics_segmentation(predictions, targets[0])


def test_metrics_segmentation__matches_confusion_oracle():
    rng = numpy.random.default_rng(1)
    for _ in range(1000):
        size = int(rng.integers(1, 30))
        predictions = rng.integers(0, 2, size)
        targets = rng.integers(0, 2, size)
        counts = _confusion_oracle(predictions, targets)
        expected = []
        for label in (0, 1):
            overlap = counts[label, label]
            predicted = counts[:, label].sum()
            target = counts[label].sum()
            expected.append(
                (
                    _safe(overlap, predicted + target - overlap),
                    _safe(2 * overlap, predicted + target),
                )
            )
        metrics = metrics_segmentation(predictions, targets)
        assert_allclose(
            [metrics["IoU_V"], metrics["IoU_A"], metrics["DSC_V"], metrics["DSC_A"]],
            [expected[0][0], expected[1][0], expected[0][1], expected[1][1]],
            equal_nan=True,
        )


def _report(**kwargs):
    runs = [
        {"V": 1.0, "A": 0.5, "F1": 0.6},
        {"V": 0.8, "A": 0.7, "F1": 0.8},
    ]
    return MetricReport.from_runs("pointnet-mod / features / 512", "classify", runs, **kwargs)


def test_metric_report__summary_population_std():
    summary = _report(run_ids=["a", "b"]).summary()
    assert summary.loc["V", "mean"] == pytest.approx(0.9)
    assert summary.loc["V", "std"] == pytest.approx(0.1)
    assert summary.loc["F1", "std"] == pytest.approx(0.1)
    assert summary.index.tolist() == ["V", "A", "F1"]


def test_metric_report__undefined_values_skipped():
    report = MetricReport.from_runs(
        "x", "classify", [{"V": 1.0, "A": float("nan"), "F1": 0.0}, {"V": 0.5, "A": 1.0, "F1": 1.0}]
    )
    assert report.mean("A") == 1.0
    assert report.std("A") == 0.0
    empty = MetricReport.from_runs("x", "classify", [])
    assert numpy.isnan(empty.mean("V"))


def test_metric_report__csv_and_digest():
    report = _report(run_ids=["seed0", "seed1"])
    assert report.to_csv().splitlines() == ["run_id,V,A,F1", "seed0,1,0.5,0.6", "seed1,0.8,0.7,0.8"]
    assert report.digest() == _report(run_ids=["seed0", "seed1"]).digest()


def test_metric_report__dict_round_trip():
    report = _report(run_ids=["s0", "s1"], failed=["s2"], protocol="repeated")
    restored = MetricReport.from_dict(report.to_dict())
    assert restored.partial
    assert restored.failed == ["s2"]
    pandas.testing.assert_frame_equal(restored.runs, report.runs)
    assert restored.digest() == report.digest()


def test_metric_report__validation():
    with pytest.raises(InvalidDataError):
        MetricReport("x", "classify", pandas.DataFrame({"V": [1.0]}))
    with pytest.raises(InvalidArgumentError):
        MetricReport("x", "detect", pandas.DataFrame())
    with pytest.raises(InvalidDataError):
        MetricReport.from_dict({"name": "x"})
