"""Evaluation metrics for the staged classifiers.

Confusion matrices with per-class precision/recall/F1, accuracy and
macro-F1, confidence statistics over correct vs. incorrect predictions,
and ROC curves with trapezoidal AUC. Zero-denominator metrics are
encoded as None ("n/a" in reports) rather than raised mid-report.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Optional, Sequence

from .predictions import STAGE_CLASSES, StageId


class MetricsError(Exception):
    pass


class IndexOutOfRange(MetricsError):
    pass


class StageMismatch(MetricsError):
    pass


class EmptyMatrix(MetricsError):
    pass


class UndefinedClassMetric(MetricsError):
    pass


class DegenerateInput(MetricsError):
    """ROC needs at least one positive and one negative sample."""


class EmptyInput(MetricsError):
    pass


def round_report(x: float, decimals: int = 3) -> float:
    """Round half away from zero, matching report table formatting."""
    q = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP))


@dataclass
class ConfusionMatrix:
    """Truth-vs-prediction counts; rows = true class, cols = predicted."""

    stage: StageId
    counts: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        n = len(STAGE_CLASSES[self.stage])
        if not self.counts:
            self.counts = [[0] * n for _ in range(n)]
        if len(self.counts) != n or any(len(row) != n for row in self.counts):
            raise IndexOutOfRange(f"matrix for {self.stage.value} must be {n}x{n}")
        if any(c < 0 for row in self.counts for c in row):
            raise IndexOutOfRange("counts must be non-negative")

    @property
    def n_classes(self) -> int:
        return len(self.counts)

    @property
    def class_names(self) -> tuple[str, ...]:
        return STAGE_CLASSES[self.stage]

    def total(self) -> int:
        return sum(sum(row) for row in self.counts)


def accumulate(cm: ConfusionMatrix, truth: int, predicted: int) -> ConfusionMatrix:
    """Increment counts[truth][predicted]; returns the same matrix."""
    n = cm.n_classes
    if not (0 <= truth < n and 0 <= predicted < n):
        raise IndexOutOfRange(f"indices ({truth}, {predicted}) outside 0..{n - 1}")
    cm.counts[truth][predicted] += 1
    return cm


def from_pairs(stage: StageId, pairs: Sequence[tuple[int, int]]) -> ConfusionMatrix:
    cm = ConfusionMatrix(stage)
    for truth, predicted in pairs:
        accumulate(cm, truth, predicted)
    return cm


def merge(a: ConfusionMatrix, b: ConfusionMatrix) -> ConfusionMatrix:
    """Elementwise sum of two matrices for the same stage."""
    if a.stage is not b.stage:
        raise StageMismatch(f"cannot merge {a.stage.value} with {b.stage.value}")
    counts = [
        [a.counts[i][j] + b.counts[i][j] for j in range(a.n_classes)]
        for i in range(a.n_classes)
    ]
    return ConfusionMatrix(a.stage, counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]


def class_metrics(cm: ConfusionMatrix, cls: int) -> ClassMetrics:
    """Precision, recall and F1 for one class; None when undefined."""
    if not 0 <= cls < cm.n_classes:
        raise IndexOutOfRange(f"class {cls} outside 0..{cm.n_classes - 1}")
    tp = cm.counts[cls][cls]
    col = sum(cm.counts[i][cls] for i in range(cm.n_classes))
    row = sum(cm.counts[cls])
    precision = tp / col if col else None
    recall = tp / row if row else None
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return ClassMetrics(precision, recall, f1)


def accuracy(cm: ConfusionMatrix) -> float:
    total = cm.total()
    if total == 0:
        raise EmptyMatrix("matrix has no counts")
    return sum(cm.counts[i][i] for i in range(cm.n_classes)) / total


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F1, from unrounded precision/recall."""
    f1s = []
    for cls in range(cm.n_classes):
        m = class_metrics(cm, cls)
        if m.f1 is None:
            raise UndefinedClassMetric(f"F1 undefined for class {cm.class_names[cls]}")
        f1s.append(m.f1)
    return sum(f1s) / len(f1s)


@dataclass(frozen=True)
class RocCurve:
    stage: StageId
    positive_class: int
    points: tuple[tuple[float, float], ...]
    auc: float


def roc_curve(
    samples: Sequence[tuple[float, bool]],
    stage: StageId = StageId.USAGE,
    positive_class: int = 0,
) -> RocCurve:
    """Threshold sweep over descending unique scores.

    samples are (positive-class score, is_positive). Equal scores are
    processed as one step; AUC is the trapezoidal area under the
    resulting (FPR, TPR) polyline.
    """
    n_pos = sum(1 for _, pos in samples if pos)
    n_neg = len(samples) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateInput("need at least one positive and one negative sample")

    ordered = sorted(samples, key=lambda s: -s[0])
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < len(ordered):
        score = ordered[i][0]
        while i < len(ordered) and ordered[i][0] == score:
            if ordered[i][1]:
                tp += 1
            else:
                fp += 1
            i += 1
        points.append((fp / n_neg, tp / n_pos))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))

    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return RocCurve(stage, positive_class, tuple(points), auc)


def pairwise_auc(samples: Sequence[tuple[float, bool]]) -> float:
    """AUC as P(score_pos > score_neg) + 0.5 * P(equal), by brute force.

    Independent O(n^2) cross-check of the trapezoidal ROC area.
    """
    pos = [s for s, p in samples if p]
    neg = [s for s, p in samples if not p]
    if not pos or not neg:
        raise DegenerateInput("need at least one positive and one negative sample")
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


@dataclass(frozen=True)
class ConfidenceStats:
    mean_all: float
    mean_false: Optional[float]
    count_all: int
    count_false: int


def confidence_stats(results: Sequence[tuple[float, bool]]) -> ConfidenceStats:
    """Mean confidence over all samples and over misclassified ones.

    results are (confidence, is_correct) pairs; mean_false is None when
    every prediction was correct.
    """
    if not results:
        raise EmptyInput("no results")
    false_confs = [conf for conf, correct in results if not correct]
    mean_all = sum(conf for conf, _ in results) / len(results)
    mean_false = sum(false_confs) / len(false_confs) if false_confs else None
    return ConfidenceStats(mean_all, mean_false, len(results), len(false_confs))


def matrix_summary(cm: ConfusionMatrix, decimals: int = 3) -> dict:
    """Machine-readable metric record for one stage."""
    per_class = {}
    for cls, name in enumerate(cm.class_names):
        m = class_metrics(cm, cls)
        per_class[name] = {
            "precision": None if m.precision is None else round_report(m.precision, decimals),
            "recall": None if m.recall is None else round_report(m.recall, decimals),
            "f1": None if m.f1 is None else round_report(m.f1, decimals),
        }
    try:
        mf1 = round_report(macro_f1(cm), decimals)
    except UndefinedClassMetric:
        mf1 = None
    return {
        "stage": cm.stage.value,
        "counts": [list(row) for row in cm.counts],
        "accuracy": round_report(accuracy(cm), decimals),
        "macro_f1": mf1,
        "per_class": per_class,
    }


def write_confusion_csv(cm: ConfusionMatrix, path: str | Path, decimals: int = 3) -> None:
    """Human-readable confusion table with per-class metric columns."""

    def fmt(v: Optional[float]) -> str:
        return "n/a" if v is None else f"{round_report(v, decimals):.{decimals}f}"

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred", *cm.class_names, "precision", "recall", "f1"])
        for cls, name in enumerate(cm.class_names):
            m = class_metrics(cm, cls)
            writer.writerow(
                [name, *cm.counts[cls], fmt(m.precision), fmt(m.recall), fmt(m.f1)]
            )


def write_roc_csv(curve: RocCurve, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fpr", "tpr"])
        for fpr, tpr in curve.points:
            writer.writerow([repr(fpr), repr(tpr)])
