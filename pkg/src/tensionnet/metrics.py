"""Binary classification metrics: accuracy, per-class F1, rank-based AUC."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DataError
from .judgment import FAKE_THRESHOLD


@dataclass
class MetricsReport:
    accuracy: float
    f1_fake: float
    f1_real: float
    auc: float | None  # None when the split has a single class
    tp: int
    fp: int
    tn: int
    fn: int

    def to_record(self, config_hash: str | None = None) -> dict:
        record = {
            "accuracy": self.accuracy,
            "f1_fake": self.f1_fake,
            "f1_real": self.f1_real,
            "auc": self.auc,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
        }
        if config_hash is not None:
            record["config_hash"] = config_hash
        return record


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def auc_score(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """AUC via the rank statistic; tied scores count half. None if one class."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)  # average ranks on ties
    pos_rank_sum = ranks[labels == 1].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def compute_metrics(probs: np.ndarray, labels: np.ndarray) -> MetricsReport:
    """Fake (label 1) is the positive class; threshold is inclusive at 0.5."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    if probs.shape != labels.shape or probs.size == 0:
        raise DataError("probs and labels must be equal-length non-empty arrays")
    preds = (probs >= FAKE_THRESHOLD).astype(int)
    tp = int(((preds == 1) & (labels == 1)).sum())
    fp = int(((preds == 1) & (labels == 0)).sum())
    tn = int(((preds == 0) & (labels == 0)).sum())
    fn = int(((preds == 0) & (labels == 1)).sum())
    return MetricsReport(
        accuracy=(tp + tn) / labels.size,
        f1_fake=_f1(tp, fp, fn),
        f1_real=_f1(tn, fn, fp),
        auc=auc_score(probs, labels),
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )
