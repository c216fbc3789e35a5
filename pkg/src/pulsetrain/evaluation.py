"""
Detection scoring: event-to-truth matching, rate metrics, ROC/AUC and the
stratified train/test split.
"""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np


class EvaluationError(ValueError):
    pass


class OverlappingTruthError(EvaluationError):
    pass


class OneClassLabelsError(EvaluationError):
    pass


class EmptyClassAfterSplitError(EvaluationError):
    pass


@dataclass(frozen=True)
class Interval:
    start_s: float
    end_s: float
    label: str = "minke"


@dataclass
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int
    hours: float = 0.0

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise EvaluationError(f"negative count in {self}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class MetricsReport:
    tpr: float
    fpr: float
    ppv: float
    f1: float
    fp_per_hour: float
    auc: float = float("nan")
    flags: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"tpr": self.tpr, "fpr": self.fpr, "ppv": self.ppv, "f1": self.f1,
                "fp_per_hour": self.fp_per_hour, "auc": self.auc, "flags": list(self.flags)}


def _span(x) -> Tuple[float, float]:
    if hasattr(x, "start_time"):
        return float(x.start_time), float(x.end_time)
    if hasattr(x, "start_s"):
        return float(x.start_s), float(x.end_s)
    return float(x[0]), float(x[1])


def overlaps_enough(a, b, fraction: float = 0.25) -> bool:
    """True when the intersection of spans ``a`` and ``b`` is at least ``fraction``
    of the shorter span (a zero-length span matches if it lies inside the other)."""
    a0, a1 = _span(a)
    b0, b1 = _span(b)
    inter = min(a1, b1) - max(a0, b0)
    if inter < 0:
        return False
    return inter >= fraction * min(a1 - a0, b1 - b0)


def match_events_to_truth(pred: Sequence, truth: Sequence, n_slices: int = 0,
                          hours: float = 0.0, fraction: float = 0.25) -> ConfusionMatrix:
    """Count TP/FP/FN by span overlap; TN = n_slices - (TP + FP + FN), floored at 0.

    ``pred`` items are events (start_time/end_time) or (start, end) pairs;
    ``truth`` items are Intervals or pairs. A truth interval matched by several
    predictions is one TP and the extra predictions are not FPs.
    """
    spans = sorted(_span(t) for t in truth)
    for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
        if b0 < a1:
            raise OverlappingTruthError(f"truth intervals [{a0}, {a1}] and [{b0}, {b1}] overlap")
    matched = [False] * len(spans)
    fp = 0
    for p in pred:
        hit = False
        for j, t in enumerate(spans):
            if overlaps_enough(p, t, fraction):
                matched[j] = True
                hit = True
        fp += not hit
    tp = sum(matched)
    fn = len(spans) - tp
    tn = max(int(n_slices) - (tp + fp + fn), 0)
    return ConfusionMatrix(tp, fp, tn, fn, hours)


def _ratio(num: float, den: float, name: str, flags: List[str]) -> float:
    if den == 0:
        flags.append(f"{name}:zero-denominator")
        return 0.0
    return num / den


def compute_metrics(cm: ConfusionMatrix, need_fp_per_hour: bool = True) -> MetricsReport:
    flags: List[str] = []
    tpr = _ratio(cm.tp, cm.tp + cm.fn, "tpr", flags)
    fpr = _ratio(cm.fp, cm.fp + cm.tn, "fpr", flags)
    ppv = _ratio(cm.tp, cm.tp + cm.fp, "ppv", flags)
    f1 = f1_score(ppv, tpr)
    if cm.hours > 0:
        fph = cm.fp / cm.hours
    elif need_fp_per_hour:
        raise EvaluationError("hours must be > 0 to report FP/h")
    else:
        fph = float("nan")
    return MetricsReport(tpr, fpr, ppv, f1, fph, flags=flags)


def f1_score(ppv: float, tpr: float) -> float:
    return 2 * ppv * tpr / (ppv + tpr) if ppv + tpr > 0 else 0.0


def _check_two_classes(labels: np.ndarray):
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise OneClassLabelsError("need at least one positive and one negative")
    return n_pos, n_neg


def roc_auc(scores, labels):
    """ROC points and trapezoid AUC.

    The threshold sweeps the distinct scores from high to low (predict positive
    when score >= threshold). Returns (thresholds, fpr, tpr, auc); the first point
    is (0, 0) at threshold +inf and the last is (1, 1). The area is accumulated in
    integer pair counts, so it equals the Mann-Whitney statistic with ties
    counted as one half.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape:
        raise EvaluationError("scores and labels differ in length")
    n_pos, n_neg = _check_two_classes(y)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    distinct = np.flatnonzero(np.diff(s)) if len(s) > 1 else np.array([], dtype=int)
    ends = np.concatenate([distinct, [len(s) - 1]])
    tps = np.cumsum(y)[ends]
    fps = np.cumsum(~y)[ends]
    tps = np.concatenate([[0], tps]).astype(np.int64)
    fps = np.concatenate([[0], fps]).astype(np.int64)
    twice_area = int(np.sum(np.diff(fps) * (tps[1:] + tps[:-1])))
    auc = twice_area / (2 * n_pos * n_neg)
    thresholds = np.concatenate([[np.inf], s[ends]])
    return thresholds, fps / n_neg, tps / n_pos, auc


def pairwise_auc(scores, labels) -> float:
    """Brute-force concordance probability over all positive/negative pairs."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos, n_neg = _check_two_classes(y)
    twice = 0
    for sp in s[y]:
        for sn in s[~y]:
            twice += 2 if sp > sn else (1 if sp == sn else 0)
    return twice / (2 * n_pos * n_neg)


def split_train_test(labels: Sequence, train_fraction: float = 0.66, seed: int = 0):
    """Stratified seeded split; returns (train_indices, test_indices).

    Each class contributes round(train_fraction * class_size) examples to the
    training part.
    """
    if not 0 < train_fraction < 1:
        raise EvaluationError("train_fraction must be in (0, 1)")
    labels = list(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for cls in sorted(set(labels), key=str):
        idx = np.array([i for i, v in enumerate(labels) if v == cls])
        idx = idx[rng.permutation(len(idx))]
        k = int(round(train_fraction * len(idx)))
        if k == 0 or k == len(idx):
            raise EmptyClassAfterSplitError(
                f"class {cls!r} with {len(idx)} examples leaves an empty side at {train_fraction}")
        train.extend(idx[:k].tolist())
        test.extend(idx[k:].tolist())
    train = np.asarray(train)[rng.permutation(len(train))]
    test = np.asarray(test)[rng.permutation(len(test))]
    return train, test
