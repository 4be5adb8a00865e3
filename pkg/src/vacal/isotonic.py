"""Weighted isotonic regression via pool-adjacent-violators (PAVA)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

from .records import ScoredExample


class WeightedPoint(NamedTuple):
    """One regression input after duplicate pooling: mean label at a score."""

    score: float
    value: float
    weight: float


@dataclass(frozen=True)
class IsotonicFit:
    """A fitted step function: non-decreasing ``values`` over ascending ``knots``."""

    knots: np.ndarray
    values: np.ndarray
    weights: np.ndarray


def pool_duplicates(examples: Sequence[ScoredExample]) -> list[WeightedPoint]:
    """Pool examples sharing a score into one point (mean label, count weight).

    Output is sorted strictly ascending by score, which is what fit_pava
    requires; the total weight equals the number of examples.
    """
    if not examples:
        raise ValueError("cannot pool an empty example sequence")
    pairs = sorted((ex.score, ex.label) for ex in examples)
    points = []
    i, n = 0, len(pairs)
    while i < n:
        score = pairs[i][0]
        total = pairs[i][1]
        j = i + 1
        while j < n and pairs[j][0] == score:
            total += pairs[j][1]
            j += 1
        count = j - i
        points.append(WeightedPoint(score, total / count, float(count)))
        i = j
    return points


@njit(cache=True)
def _pava_kernel(values, weights):  # pragma: no cover - exercised via fit_pava
    n = values.shape[0]
    sums = np.empty(n)
    wts = np.empty(n)
    means = np.empty(n)
    counts = np.empty(n, np.int64)
    top = -1
    for i in range(n):
        top += 1
        sums[top] = values[i] * weights[i]
        wts[top] = weights[i]
        means[top] = values[i]
        counts[top] = 1
        # Merge decisions compare the block means that are ultimately emitted,
        # so the output is non-decreasing exactly, not merely up to rounding.
        while top > 0 and means[top - 1] > means[top]:
            sums[top - 1] += sums[top]
            wts[top - 1] += wts[top]
            counts[top - 1] += counts[top]
            means[top - 1] = sums[top - 1] / wts[top - 1]
            top -= 1
    out = np.empty(n)
    k = 0
    for b in range(top + 1):
        v = means[b]
        for _ in range(counts[b]):
            out[k] = v
            k += 1
    return out


def pava_values(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Least-squares non-decreasing fit to ``values`` under ``weights``.

    Single left-to-right pass with a block stack; adjacent violators are
    merged into weighted-mean blocks.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    if values.shape != weights.shape or values.ndim != 1:
        raise ValueError("values and weights must be 1-D arrays of equal length")
    if values.size == 0:
        raise ValueError("cannot fit an empty sequence")
    return _pava_kernel(values, weights)


def fit_pava(points: Sequence[WeightedPoint]) -> IsotonicFit:
    """Fit the isotonic step function to pooled points.

    Points must be sorted strictly ascending by score (as produced by
    pool_duplicates); duplicates are rejected because the fitted function
    must be single-valued per score.
    """
    if not points:
        raise ValueError("cannot fit an empty point sequence")
    knots = np.array([p.score for p in points], dtype=np.float64)
    if np.any(knots[1:] <= knots[:-1]):
        raise ValueError("points must be sorted strictly ascending by score")
    raw = np.array([p.value for p in points], dtype=np.float64)
    weights = np.array([p.weight for p in points], dtype=np.float64)
    if np.any(weights <= 0):
        raise ValueError("weights must be positive")
    fitted = _pava_kernel(raw, weights)
    return IsotonicFit(knots=knots, values=fitted, weights=weights)


def evaluate(fit: IsotonicFit, z: float) -> float:
    """Step-function value at ``z``: the value of the greatest knot <= z,
    or the first value when z lies below every knot."""
    idx = int(np.searchsorted(fit.knots, z, side="right")) - 1
    if idx < 0:
        idx = 0
    return float(fit.values[idx])
