"""ROC AUC, best-threshold F1 and FPR at a fixed TPR.

Labels are booleans: ``True`` marks the positive class. By default the
positive class is the anomalous one and higher scores predict positive;
pass ``positive="normal"`` to flip the prediction direction (predicted
positive means ``score < threshold``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import UsageError


@dataclass
class ScoredSet:
    scores: np.ndarray
    labels: np.ndarray
    positive: str = "anomalous"

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64).ravel()
        self.labels = np.asarray(self.labels, dtype=bool).ravel()
        if self.scores.shape != self.labels.shape:
            raise UsageError("scores and labels differ in length")
        if self.positive not in ("anomalous", "normal"):
            raise UsageError(f"positive must be 'anomalous' or 'normal', got {self.positive!r}")

    def require_both_classes(self):
        n_pos = int(self.labels.sum())
        if n_pos == 0 or n_pos == len(self.labels):
            raise UsageError("both positive and negative samples are required")


def _scored(scores, labels, positive) -> ScoredSet:
    s = scores if isinstance(scores, ScoredSet) else ScoredSet(scores, labels, positive)
    s.require_both_classes()
    return s


def roc_auc(scores, labels=None, positive="anomalous") -> float:
    """Mann-Whitney AUC with average ranks for ties.

    Equals the probability that a random positive is ranked above a random
    negative, ties counting one half.
    """
    s = _scored(scores, labels, positive)
    ranks = rankdata(s.scores if s.positive == "anomalous" else -s.scores)
    n_pos = int(s.labels.sum())
    n_neg = len(s.labels) - n_pos
    u = ranks[s.labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _sweep(s: ScoredSet):
    """TP and FP counts for every candidate threshold.

    Thresholds are the distinct scores plus +inf and -inf, ascending.
    """
    thresholds = np.concatenate([[-np.inf], np.unique(s.scores), [np.inf]])
    pos = np.sort(s.scores[s.labels])
    neg = np.sort(s.scores[~s.labels])
    if s.positive == "anomalous":
        # predicted positive: score >= t
        tp = len(pos) - np.searchsorted(pos, thresholds, side="left")
        fp = len(neg) - np.searchsorted(neg, thresholds, side="left")
    else:
        # predicted positive: score < t
        tp = np.searchsorted(pos, thresholds, side="left")
        fp = np.searchsorted(neg, thresholds, side="left")
    return thresholds, tp, fp, len(pos)


def best_f1(scores, labels=None, positive="anomalous"):
    """Maximum F1 over all thresholds and the lowest threshold achieving it."""
    s = _scored(scores, labels, positive)
    thresholds, tp, fp, n_pos = _sweep(s)
    # -inf predicts the same as the lowest score when positives score high;
    # +inf is only distinct when positives score low
    keep = np.isfinite(thresholds)
    keep[-1] = s.positive == "normal"
    thresholds, tp, fp = thresholds[keep], tp[keep], fp[keep]
    fn = n_pos - tp
    f1 = 2.0 * tp / np.maximum(2 * tp + fp + fn, 1)
    i = int(np.argmax(f1))  # first index == lowest threshold on ties
    return float(f1[i]), float(thresholds[i])


def fpr_at_tpr(scores, labels=None, tpr_target=0.995, positive="anomalous") -> float:
    """FPR at the most conservative threshold whose TPR reaches the target.

    "Most conservative" is the largest threshold when positives score high
    and the smallest when they score low.
    """
    if not 0 < tpr_target <= 1:
        raise UsageError(f"tpr_target must lie in (0, 1], got {tpr_target}")
    s = _scored(scores, labels, positive)
    thresholds, tp, fp, n_pos = _sweep(s)
    n_neg = len(s.labels) - n_pos
    ok = np.flatnonzero(tp / n_pos >= tpr_target)
    i = ok[-1] if s.positive == "anomalous" else ok[0]
    return float(fp[i] / n_neg)
