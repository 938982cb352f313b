import numpy as np
import pytest
from sklearn.metrics import precision_recall_fscore_support

from qdistill.errors import ArgumentError
from qdistill.metrics import (
    classification_metrics,
    confusion_counts,
    efficiency_ratios,
    metrics_from_counts,
    parameter_proportion,
)


def labels_from_counts(tp, tn, fp, fn):
    y_true = [1] * tp + [1] * fn + [0] * tn + [0] * fp
    y_pred = [1] * tp + [0] * fn + [0] * tn + [1] * fp
    return y_true, y_pred


class TestCountFormulas:
    def test_reference_fixture(self):
        scores = metrics_from_counts(tp=50, tn=30, fp=10, fn=10)
        assert scores["accuracy"] == pytest.approx(0.8)
        assert scores["precision"] == pytest.approx(5 / 6)
        assert scores["recall"] == pytest.approx(5 / 6)
        assert scores["f1"] == pytest.approx(5 / 6)

    def test_zero_denominators(self):
        scores = metrics_from_counts(tp=0, tn=5, fp=0, fn=0)
        assert scores == {"accuracy": 1.0, "precision": 0.0, "recall": 0.0, "f1": 0.0}


class TestClassificationMetrics:
    def test_binary_uses_class_one_as_positive(self):
        y_true, y_pred = labels_from_counts(50, 30, 10, 10)
        report = classification_metrics(y_true, y_pred, 2)
        assert report.accuracy == pytest.approx(0.8)
        assert report.precision == pytest.approx(5 / 6)
        assert report.recall == pytest.approx(5 / 6)
        assert report.f1 == pytest.approx(5 / 6)
        assert report.averaging == "binary"
        assert report.confusion == ((30, 10), (10, 50))

    def test_perfect_predictions(self):
        labels = [0, 1, 2, 1, 0, 2]
        report = classification_metrics(labels, labels, 3)
        assert (report.accuracy, report.precision, report.recall, report.f1) == (1.0, 1.0, 1.0, 1.0)

    def test_macro_average_matches_sklearn(self):
        rng = np.random.default_rng(3)
        y_true = rng.integers(0, 4, 200)
        y_pred = np.where(rng.random(200) < 0.6, y_true, rng.integers(0, 4, 200))
        report = classification_metrics(y_true, y_pred, 4)
        precision, recall, f1, _ = precision_recall_fscore_support(
            y_true, y_pred, labels=[0, 1, 2, 3], average="macro", zero_division=0
        )
        assert report.averaging == "macro"
        assert report.precision == pytest.approx(precision)
        assert report.recall == pytest.approx(recall)
        assert report.f1 == pytest.approx(f1)
        assert report.accuracy == pytest.approx(np.mean(y_true == y_pred))

    def test_confusion_counts_fixed_size(self):
        counts = confusion_counts([0, 0], [0, 0], 3)
        assert counts.shape == (3, 3)
        assert counts[0, 0] == 2

    def test_empty(self):
        with pytest.raises(ArgumentError):
            classification_metrics([], [], 2)

    def test_length_mismatch(self):
        with pytest.raises(ArgumentError):
            confusion_counts([0, 1], [0], 2)


class TestEfficiency:
    def test_accuracy_per_parameter(self):
        ratios = efficiency_ratios(0.8012, 9275)
        assert ratios["acc_per_param"] == pytest.approx(8.64e-5, rel=5e-3)
        assert "acc_per_tkd" not in ratios

    def test_accuracy_per_second(self):
        ratios = efficiency_ratios(0.9, 100, seconds=30.0)
        assert ratios["acc_per_tkd"] == pytest.approx(0.03)

    def test_zero_seconds_omitted(self):
        assert "acc_per_tkd" not in efficiency_ratios(0.9, 100, seconds=0.0)

    def test_report_with_efficiency(self):
        report = classification_metrics([0, 1], [0, 1], 2).with_efficiency(50, 4.0)
        assert report.acc_per_param == pytest.approx(0.02)
        assert report.acc_per_tkd == pytest.approx(0.25)
        assert report.to_dict()["confusion"] == [[1, 0], [0, 1]]

    def test_parameter_proportion(self):
        assert parameter_proportion(9275, 1.1e9) == pytest.approx(8.43e-6, rel=1e-3)

    def test_non_positive_params(self):
        with pytest.raises(ArgumentError):
            efficiency_ratios(0.5, 0)
