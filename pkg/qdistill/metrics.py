"""
Classification Metrics

Accuracy, precision, recall and F1 from confusion counts, plus the
efficiency ratios used to compare students: accuracy per parameter,
accuracy per second of distillation, and the student/teacher size ratio.
Binary tasks score class 1 as the positive class; multi-class tasks use
macro averages over per-class one-vs-rest counts.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.metrics import confusion_matrix

from .errors import ArgumentError

logger = logging.getLogger(__name__)

DEFAULT_TEACHER_PARAMS = 1.1e9


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    n_examples: int
    averaging: str
    confusion: tuple = ()
    acc_per_param: Optional[float] = None
    acc_per_tkd: Optional[float] = None

    def to_dict(self) -> dict:
        data = asdict(self)
        data["confusion"] = [list(row) for row in self.confusion]
        return data

    def with_efficiency(self, n_params: int, seconds: Optional[float] = None) -> "MetricsReport":
        ratios = efficiency_ratios(self.accuracy, n_params, seconds)
        return MetricsReport(
            self.accuracy, self.precision, self.recall, self.f1, self.n_examples, self.averaging,
            self.confusion, ratios["acc_per_param"], ratios.get("acc_per_tkd"),
        )


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator else 0.0


def confusion_counts(y_true: Sequence[int], y_pred: Sequence[int], n_classes: int) -> np.ndarray:
    """C x C matrix; rows are true classes, columns predicted classes"""
    if len(y_true) != len(y_pred):
        raise ArgumentError(f"{len(y_true)} labels but {len(y_pred)} predictions")
    if len(y_true) == 0:
        raise ArgumentError("Cannot score an empty example list")
    return confusion_matrix(y_true, y_pred, labels=list(range(n_classes)))


def metrics_from_counts(tp: int, tn: int, fp: int, fn: int) -> dict:
    """Acc, P, R and F1 of one positive class; a zero denominator yields 0"""
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    return {
        "accuracy": _ratio(tp + tn, tp + tn + fp + fn),
        "precision": precision,
        "recall": recall,
        "f1": _ratio(2 * precision * recall, precision + recall),
    }


def _one_vs_rest(counts: np.ndarray, positive: int) -> dict:
    total = int(counts.sum())
    tp = int(counts[positive, positive])
    fp = int(counts[:, positive].sum()) - tp
    fn = int(counts[positive, :].sum()) - tp
    return metrics_from_counts(tp, total - tp - fp - fn, fp, fn)


def classification_metrics(y_true: Sequence[int], y_pred: Sequence[int], n_classes: int) -> MetricsReport:
    counts = confusion_counts(y_true, y_pred, n_classes)
    total = int(counts.sum())
    accuracy = _ratio(int(np.trace(counts)), total)
    if n_classes == 2:
        scores = _one_vs_rest(counts, 1)
        precision, recall, f1 = scores["precision"], scores["recall"], scores["f1"]
        averaging = "binary"
    else:
        per_class = [_one_vs_rest(counts, c) for c in range(n_classes)]
        precision = float(np.mean([s["precision"] for s in per_class]))
        recall = float(np.mean([s["recall"] for s in per_class]))
        f1 = float(np.mean([s["f1"] for s in per_class]))
        averaging = "macro"
    return MetricsReport(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        n_examples=total,
        averaging=averaging,
        confusion=tuple(tuple(int(v) for v in row) for row in counts),
    )


def efficiency_ratios(accuracy: float, n_params: int, seconds: Optional[float] = None) -> dict:
    if n_params <= 0:
        raise ArgumentError(f"Parameter count must be positive, got {n_params}")
    ratios = {"acc_per_param": accuracy / n_params}
    if seconds is not None and math.isfinite(seconds) and seconds > 0:
        ratios["acc_per_tkd"] = accuracy / seconds
    return ratios


def parameter_proportion(student_params: int, teacher_params: float = DEFAULT_TEACHER_PARAMS) -> float:
    """Student size as a fraction of the teacher's"""
    if teacher_params <= 0:
        raise ArgumentError(f"Teacher parameter count must be positive, got {teacher_params}")
    return student_params / teacher_params
