"""Calibration and prediction-quality metrics: ECE, Brier, AUC, macro-F1,
and reliability-diagram bin data."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ReliabilityBins:
    """Per-bin tallies over M equal-width probability bins.

    Bin m (1-based) covers ((m-1)/M, m/M]; a prediction of exactly 0 goes to
    bin 1.
    """

    M: int
    counts: tuple[int, ...]
    sum_pred: tuple[float, ...]
    sum_label: tuple[float, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)


@dataclass(frozen=True)
class MetricsReport:
    """Scalar metric bundle for one configuration."""

    ece: float
    brier: float
    auc: float
    f1_macro: float
    n: int
    tag: str = ""

    def to_dict(self) -> dict:
        return {
            "tag": self.tag,
            "n": self.n,
            "ece": self.ece,
            "brier": self.brier,
            "auc": self.auc,
            "f1_macro": self.f1_macro,
        }


def _as_pred_label_arrays(preds, labels) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(preds, dtype=np.float64)
    y = np.asarray(labels)
    if p.ndim != 1 or y.ndim != 1 or len(p) != len(y):
        raise ValueError(f"preds and labels must be 1-D and equal length, got {len(p)} vs {len(y)}")
    if len(p) == 0:
        raise ValueError("need at least one prediction")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    return p, y.astype(np.int64)


def reliability_bins(preds, labels, M: int = 10) -> ReliabilityBins:
    """Assign each prediction to its bin and accumulate counts and sums."""
    p, y = _as_pred_label_arrays(preds, labels)
    if not (isinstance(M, int) and M >= 1):
        raise ValueError(f"M must be a positive integer, got {M!r}")
    if np.any(p < 0) or np.any(p > 1):
        raise ValueError("predictions must lie in [0, 1]")
    idx = np.ceil(p * M).astype(np.int64)
    idx[idx < 1] = 1  # exactly-zero predictions belong to bin 1
    counts = np.bincount(idx, minlength=M + 1)[1:]
    sum_pred = np.bincount(idx, weights=p, minlength=M + 1)[1:]
    sum_label = np.bincount(idx, weights=y.astype(np.float64), minlength=M + 1)[1:]
    return ReliabilityBins(
        M=M,
        counts=tuple(int(c) for c in counts),
        sum_pred=tuple(float(s) for s in sum_pred),
        sum_label=tuple(float(s) for s in sum_label),
    )


def ece(bins: ReliabilityBins) -> float:
    """Bin-weighted mean absolute gap between predicted probability and
    empirical positive fraction; empty bins contribute nothing."""
    n = bins.total
    if n == 0:
        raise ValueError("cannot compute ECE over zero predictions")
    acc = 0.0
    for count, sp, sl in zip(bins.counts, bins.sum_pred, bins.sum_label):
        if count:
            acc += count * abs(sl / count - sp / count)
    return acc / n


def brier(preds, labels) -> float:
    """Mean squared error of the probabilistic predictions."""
    p, y = _as_pred_label_arrays(preds, labels)
    return float(np.mean((p - y) ** 2))


def auc(scores, labels) -> float:
    """Rank-based (Mann-Whitney) AUC with half credit for tied scores.

    Undefined when only one class is present; that is an error rather
    than a 0.5 default.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or len(s) != len(y):
        raise ValueError(f"scores and labels must be 1-D and equal length, got {len(s)} vs {len(y)}")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    n_pos = int(np.sum(y == 1))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC is undefined with a single class present")
    _, inverse, counts = np.unique(s, return_inverse=True, return_counts=True)
    starts = np.cumsum(counts) - counts  # 0-based rank where each tie group begins
    avg_rank = starts + (counts + 1) / 2.0  # 1-based average rank of the group
    ranks = avg_rank[inverse]
    pos_rank_sum = float(np.sum(ranks[y == 1]))
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def f1_macro(preds, labels, threshold: float = 0.5) -> float:
    """Unweighted mean of the two per-class F1 scores at a hard threshold.

    pred >= threshold counts as class 1. A class whose F1 denominator is
    zero contributes 0.
    """
    p, y = _as_pred_label_arrays(preds, labels)
    hard = (p >= threshold).astype(np.int64)

    def class_f1(cls: int) -> float:
        tp = int(np.sum((hard == cls) & (y == cls)))
        fp = int(np.sum((hard == cls) & (y != cls)))
        fn = int(np.sum((hard != cls) & (y == cls)))
        denom = 2 * tp + fp + fn
        return 2.0 * tp / denom if denom else 0.0

    return 0.5 * (class_f1(1) + class_f1(0))


def evaluate_all(preds, scores_for_auc, labels, M: int = 10, tag: str = "") -> MetricsReport:
    """Bundle the four metrics; AUC ranks by ``scores_for_auc`` so raw-score
    ranking can be assessed alongside calibrated probabilities."""
    if len(scores_for_auc) != len(preds):
        raise ValueError(
            f"scores_for_auc and preds must be equal length, got {len(scores_for_auc)} vs {len(preds)}"
        )
    return MetricsReport(
        ece=ece(reliability_bins(preds, labels, M)),
        brier=brier(preds, labels),
        auc=auc(scores_for_auc, labels),
        f1_macro=f1_macro(preds, labels),
        n=len(preds),
        tag=tag,
    )


def bins_to_csv(bins: ReliabilityBins, path) -> None:
    """Write one row per bin: ``bin,lo,hi,count,mean_pred,frac_pos``.

    Empty bins render their undefined statistics as ``nan``.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("bin,lo,hi,count,mean_pred,frac_pos\n")
        for m in range(1, bins.M + 1):
            count = bins.counts[m - 1]
            if count:
                mean_pred = repr(bins.sum_pred[m - 1] / count)
                frac_pos = repr(bins.sum_label[m - 1] / count)
            else:
                mean_pred = frac_pos = "nan"
            lo = (m - 1) / bins.M
            hi = m / bins.M
            fh.write(f"{m},{lo!r},{hi!r},{count},{mean_pred},{frac_pos}\n")
