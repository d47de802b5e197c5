"""Binary classification metrics with phishing (label 1) as the positive class."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricsReport:
    tn: int
    fp: int
    fn: int
    tp: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    roc_auc: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricsReport":
        return cls(**{k: doc[k] for k in cls.__dataclass_fields__})


def _binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must be binary")
    return arr.astype(np.int64)


def confusion(labels, predictions) -> ConfusionMatrix:
    y = _binary(labels, "labels")
    p = _binary(predictions, "predictions")
    if y.shape != p.shape:
        raise ValueError("labels and predictions differ in length")
    if y.size == 0:
        raise ValueError("cannot score an empty set")
    return ConfusionMatrix(
        tp=int(np.sum((y == 1) & (p == 1))),
        tn=int(np.sum((y == 0) & (p == 0))),
        fp=int(np.sum((y == 0) & (p == 1))),
        fn=int(np.sum((y == 1) & (p == 0))),
    )


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def prf1(cm: ConfusionMatrix) -> tuple[float, float, float, float]:
    """Accuracy, precision, recall and F1; a zero denominator yields 0."""
    if cm.total <= 0:
        raise ValueError("confusion matrix is empty")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return accuracy, precision, recall, f1


def _check_scores(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = _binary(labels, "labels")
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if y.sum() == 0 or y.sum() == y.size:
        raise ValueError("ROC needs both classes present")
    return s, y


def roc_auc(scores, labels) -> float:
    """Mann-Whitney U / (n_pos * n_neg); ties count one half."""
    s, y = _check_scores(scores, labels)
    ranks = rankdata(s)  # average ranks for ties
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_curve(scores, labels) -> list[tuple[float, float, float]]:
    """``(fpr, tpr, threshold)`` points, one per distinct score, from (0, 0) to (1, 1).

    A sample is predicted positive when its score is >= threshold. The first
    point uses threshold +inf.
    """
    s, y = _check_scores(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s_sorted, y_sorted = s[order], y[order]
    last_of_group = np.r_[np.diff(s_sorted) != 0, True]
    tps = np.cumsum(y_sorted)[last_of_group]
    fps = np.cumsum(1 - y_sorted)[last_of_group]
    n_pos, n_neg = tps[-1], fps[-1]
    points = [(0.0, 0.0, float("inf"))]
    for tp, fp, thr in zip(tps, fps, s_sorted[last_of_group]):
        points.append((fp / n_neg, tp / n_pos, float(thr)))
    return points


def curve_auc(points) -> float:
    """Trapezoidal area under a list of ``(fpr, tpr, ...)`` points."""
    fpr = np.array([p[0] for p in points])
    tpr = np.array([p[1] for p in points])
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def evaluate(labels, predictions, scores) -> MetricsReport:
    cm = confusion(labels, predictions)
    acc, prec, rec, f1 = prf1(cm)
    return MetricsReport(
        tn=cm.tn, fp=cm.fp, fn=cm.fn, tp=cm.tp,
        accuracy=acc, precision=prec, recall=rec, f1=f1,
        roc_auc=roc_auc(scores, labels),
    )  # fmt: skip
