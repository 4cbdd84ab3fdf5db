# The MIT License (MIT)
# Copyright © 2024 fraudbench contributors

# Permission is hereby granted, free of charge, to any person obtaining a copy of this software and associated
# documentation files (the “Software”), to deal in the Software without restriction, including without limitation
# the rights to use, copy, modify, merge, publish, distribute, sublicense, and/or sell copies of the Software,
# and to permit persons to whom the Software is furnished to do so, subject to the following conditions:

# The above copyright notice and this permission notice shall be included in all copies or substantial portions of
# the Software.

# THE SOFTWARE IS PROVIDED “AS IS”, WITHOUT WARRANTY OF ANY KIND, EXPRESS OR IMPLIED, INCLUDING BUT NOT LIMITED TO
# THE WARRANTIES OF MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL
# THE AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER LIABILITY, WHETHER IN AN ACTION
# OF CONTRACT, TORT OR OTHERWISE, ARISING FROM, OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER
# DEALINGS IN THE SOFTWARE.
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from fraudbench.errors import MetricsError
from fraudbench.protocol import ClassMetrics, ConfusionMatrix, EvalReport, RocPoint


def _ratio(num: int, den: int) -> float:
    # 0/0 is reported as 0
    return num / den if den else 0.0


def _check_inputs(scores, truth) -> Tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if scores.shape != truth.shape:
        raise MetricsError(f"{scores.size} scores for {truth.size} labels")
    if not np.all(np.isfinite(scores)):
        raise MetricsError("scores must be finite")
    if not np.all((truth == 0) | (truth == 1)):
        raise MetricsError("truth labels must be 0 or 1")
    truth = truth.astype(np.int64)
    n_pos = int(truth.sum())
    if n_pos == 0 or n_pos == truth.size:
        raise MetricsError("truth contains a single class; ROC and macro averages need both")
    return scores, truth


def confusion_matrix(truth, predicted) -> ConfusionMatrix:
    truth = np.asarray(truth).reshape(-1).astype(np.int64)
    predicted = np.asarray(predicted).reshape(-1).astype(np.int64)
    if truth.shape != predicted.shape:
        raise MetricsError(f"{predicted.size} predictions for {truth.size} labels")
    return ConfusionMatrix(
        tp=int(np.sum((predicted == 1) & (truth == 1))),
        fp=int(np.sum((predicted == 1) & (truth == 0))),
        tn=int(np.sum((predicted == 0) & (truth == 0))),
        fn=int(np.sum((predicted == 0) & (truth == 1))),
    )


def precision_recall_f1(cm: ConfusionMatrix) -> Tuple[float, float, float]:
    """
    Precision, recall and their harmonic mean for the positive class.
    Any 0/0 is reported as 0.
    """
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    recall = _ratio(cm.tp, cm.tp + cm.fn)
    denom = precision + recall
    f1 = 2.0 * precision * recall / denom if denom > 0 else 0.0
    return precision, recall, f1


def class_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    p, r, f1 = precision_recall_f1(cm)
    return ClassMetrics(precision=p, recall=r, f1=f1, support=cm.tp + cm.fn)


def per_class_metrics(cm: ConfusionMatrix) -> Dict[int, ClassMetrics]:
    """Metrics with fraud as positive (key 1) and with legit as positive (key 0)."""
    return {0: class_metrics(cm.flipped()), 1: class_metrics(cm)}


def macro_average(per_class: Dict[int, ClassMetrics]) -> ClassMetrics:
    missing = [c for c in (0, 1) if c not in per_class or per_class[c].support == 0]
    if missing:
        raise MetricsError(f"macro average needs both classes in the ground truth; missing {missing}")
    values = [per_class[0], per_class[1]]
    return ClassMetrics(
        precision=sum(v.precision for v in values) / 2.0,
        recall=sum(v.recall for v in values) / 2.0,
        f1=sum(v.f1 for v in values) / 2.0,
        support=sum(v.support for v in values),
    )


def weighted_average(per_class: Dict[int, ClassMetrics]) -> ClassMetrics:
    total = sum(v.support for v in per_class.values())
    if total == 0:
        raise MetricsError("weighted average over an empty ground truth")

    def mean(attr):
        return sum(getattr(v, attr) * v.support for v in per_class.values()) / total

    return ClassMetrics(precision=mean("precision"), recall=mean("recall"), f1=mean("f1"), support=total)


def roc_curve(scores, truth) -> List[RocPoint]:
    """
    One point per distinct score, thresholds descending, starting at
    (0, 0, +inf). A row counts as positive when score >= threshold, so tied
    scores move together.
    """
    scores, truth = _check_inputs(scores, truth)
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    block_end = np.append(np.flatnonzero(sorted_scores[:-1] != sorted_scores[1:]), truth.size - 1)
    tps = np.cumsum(truth[order])[block_end]
    fps = block_end + 1 - tps
    points = [RocPoint(0.0, 0.0, math.inf)]
    for tp, fp, thr in zip(tps, fps, sorted_scores[block_end]):
        points.append(RocPoint(int(fp) / n_neg, int(tp) / n_pos, float(thr)))
    return points


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with tied values sharing the mean of their positions."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    sorted_values = values[order]
    starts = np.flatnonzero(np.r_[True, sorted_values[1:] != sorted_values[:-1]])
    ends = np.r_[starts[1:], values.size]
    ranks = np.empty(values.size)
    for start, end in zip(starts, ends):
        ranks[order[start:end]] = 0.5 * (start + 1 + end)
    return ranks


def roc_auc(scores, truth) -> float:
    """Mann-Whitney statistic: P(positive outranks negative), ties count half."""
    scores, truth = _check_inputs(scores, truth)
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    rank_sum = float(np.sum(average_ranks(scores)[truth == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def trapezoid_auc(points: Sequence[RocPoint]) -> float:
    area = 0.0
    for a, b in zip(points[:-1], points[1:]):
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0
    return area


def evaluate(scores, truth, threshold: float = 0.5) -> EvalReport:
    """
    Confusion at `threshold` (positive when score >= threshold), per-class,
    macro and weighted precision/recall/F1, ROC curve and AUC.
    """
    scores, truth = _check_inputs(scores, truth)
    cm = confusion_matrix(truth, (scores >= threshold).astype(np.int64))
    per_class = per_class_metrics(cm)
    return EvalReport(
        threshold=threshold,
        confusion=cm,
        per_class=per_class,
        macro=macro_average(per_class),
        weighted=weighted_average(per_class),
        roc_auc=roc_auc(scores, truth),
        roc_points=roc_curve(scores, truth),
    )
