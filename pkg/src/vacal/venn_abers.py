"""Inductive Venn-Abers prediction: the per-query procedure, a precomputed
constant-table evaluator over score cells, and the log-loss-regret merge."""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .isotonic import evaluate, fit_pava, pava_values, pool_duplicates
from .records import ScoredExample

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Multiprobability:
    """Lower/upper probability pair for the positive class."""

    p0: float
    p1: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.p0 <= self.p1 <= 1.0:
            raise ValueError(f"require 0 <= p0 <= p1 <= 1, got ({self.p0!r}, {self.p1!r})")


def merge(mp: Multiprobability) -> float:
    """Collapse a pair into the point probability minimizing log-loss regret."""
    p = mp.p1 / (1.0 - mp.p0 + mp.p1)
    # Rounding can push the quotient a hair outside [p0, p1]; the merged
    # probability must honor the bound exactly.
    return min(max(p, mp.p0), mp.p1)


def predict_naive(calibration: Sequence[ScoredExample], z: float) -> Multiprobability:
    """Per-query prediction: fit two isotonic regressions from scratch.

    p0 (p1) is the fitted value at ``z`` after augmenting the calibration set
    with (z, 0) ((z, 1)); a query tying an existing calibration score is
    pooled with it. This is the reference route the table evaluator is
    checked against.
    """
    examples = list(calibration)
    if len(examples) < 2:
        raise ValueError(f"need at least 2 calibration examples, got {len(examples)}")
    if not math.isfinite(z):
        raise ValueError(f"query score must be finite, got {z!r}")
    p0 = evaluate(fit_pava(pool_duplicates(examples + [ScoredExample(z, 0)])), z)
    p1 = evaluate(fit_pava(pool_duplicates(examples + [ScoredExample(z, 1)])), z)
    if p0 == p1:
        logger.debug("degenerate multiprobability p0 == p1 == %r at z=%r", p0, z)
    return Multiprobability(p0, p1)


@dataclass(frozen=True)
class IvapCalibrator:
    """Precomputed lookup table mapping any test score to its (p0, p1) pair.

    The map z -> (p0, p1) is piecewise constant over the 2d+1 cells induced by
    the d distinct calibration scores: the open gaps between/around them and
    the scores themselves. ``p0_table``/``p1_table`` hold one pair per cell in
    score order (even indices are gaps, odd are points). Immutable after fit
    and safe to share across threads.
    """

    scores: np.ndarray
    p0_table: np.ndarray
    p1_table: np.ndarray
    m: int
    n_pos: int | None = None
    n_neg: int | None = None

    def predict(self, z: float) -> Multiprobability:
        """Look up the cell containing ``z`` and return its stored pair."""
        cell = self._cell_index(z)
        return Multiprobability(float(self.p0_table[cell]), float(self.p1_table[cell]))

    def predict_batch(self, zs: Sequence[float]) -> list[tuple[Multiprobability, float]]:
        """Elementwise predict + merge, order preserved."""
        out = []
        for z in zs:
            mp = self.predict(z)
            out.append((mp, merge(mp)))
        return out

    def _cell_index(self, z: float) -> int:
        if not math.isfinite(z):
            raise ValueError(f"query score must be finite, got {z!r}")
        d = len(self.scores)
        i = int(np.searchsorted(self.scores, z, side="left"))
        if i < d and self.scores[i] == z:
            return 2 * i + 1
        return 2 * i

    def to_json(self) -> dict:
        cells = [
            {
                "kind": "point" if i % 2 else "gap",
                "p0": float(self.p0_table[i]),
                "p1": float(self.p1_table[i]),
            }
            for i in range(len(self.p0_table))
        ]
        return {"scores": [float(s) for s in self.scores], "cells": cells, "m": self.m}

    @classmethod
    def from_json(cls, obj: dict) -> "IvapCalibrator":
        scores = np.asarray(obj["scores"], dtype=np.float64)
        cells = obj["cells"]
        if len(cells) != 2 * len(scores) + 1:
            raise ValueError(
                f"expected {2 * len(scores) + 1} cells for {len(scores)} scores, got {len(cells)}"
            )
        p0 = np.empty(len(cells))
        p1 = np.empty(len(cells))
        for i, cell in enumerate(cells):
            expected = "point" if i % 2 else "gap"
            if cell.get("kind") != expected:
                raise ValueError(f"cell {i} has kind {cell.get('kind')!r}, expected {expected!r}")
            Multiprobability(cell["p0"], cell["p1"])
            p0[i] = cell["p0"]
            p1[i] = cell["p1"]
        return cls(
            scores=_frozen(scores), p0_table=_frozen(p0), p1_table=_frozen(p1), m=int(obj["m"])
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "IvapCalibrator":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def fit(calibration: Sequence[ScoredExample]) -> IvapCalibrator:
    """Precompute the cell table by running the per-query procedure once per
    cell at a representative point (the score itself for point cells, an
    interior point for gaps; constancy within a cell makes the choice moot).
    """
    examples = list(calibration)
    m = len(examples)
    if m < 2:
        raise ValueError(f"need at least 2 calibration examples, got {m}")
    pairs = np.array(sorted((ex.score, ex.label) for ex in examples), dtype=np.float64)
    if not np.all(np.isfinite(pairs[:, 0])):
        raise ValueError("calibration scores must be finite")
    scores, inverse, counts = np.unique(pairs[:, 0], return_inverse=True, return_counts=True)
    label_sums = np.bincount(inverse, weights=pairs[:, 1])
    n_pos = int(round(label_sums.sum()))
    n_neg = m - n_pos
    if n_pos == 0 or n_neg == 0:
        warnings.warn(
            f"calibration labels are all {1 if n_neg == 0 else 0}; "
            "IVAP outputs will be one-sided",
            stacklevel=2,
        )

    counts_f = counts.astype(np.float64)
    base_values = label_sums / counts_f
    d = len(scores)
    n_cells = 2 * d + 1
    p0_table = np.empty(n_cells)
    p1_table = np.empty(n_cells)

    def augmented_value(z: float, label: int, point_idx: int | None) -> float:
        # Replicates exactly what pool_duplicates does to calibration + (z, label).
        if point_idx is None:
            pos = int(np.searchsorted(scores, z))
            knots = np.insert(scores, pos, z)
            values = np.insert(base_values, pos, float(label))
            weights = np.insert(counts_f, pos, 1.0)
            eval_idx = pos
        else:
            knots = scores
            values = base_values.copy()
            weights = counts_f.copy()
            values[point_idx] = (label_sums[point_idx] + label) / (counts[point_idx] + 1)
            weights[point_idx] += 1.0
            eval_idx = point_idx
        fitted = pava_values(values, weights)
        return float(fitted[eval_idx])

    def fill_cell(cell: int, z: float, point_idx: int | None) -> None:
        p0_table[cell] = augmented_value(z, 0, point_idx)
        p1_table[cell] = augmented_value(z, 1, point_idx)
        if p0_table[cell] == p1_table[cell]:
            logger.debug("degenerate cell %d: p0 == p1 == %r", cell, p0_table[cell])

    left = scores[0] - 1.0
    if not left < scores[0]:
        left = np.nextafter(scores[0], -np.inf)
    fill_cell(0, float(left), None)
    for k in range(d):
        fill_cell(2 * k + 1, float(scores[k]), k)
        if k + 1 < d:
            mid = 0.5 * scores[k] + 0.5 * scores[k + 1]
            if scores[k] < mid < scores[k + 1]:
                fill_cell(2 * k + 2, float(mid), None)
            else:
                # Adjacent representable doubles: no query can land in this
                # gap, so reuse the left point cell to keep the table monotone.
                p0_table[2 * k + 2] = p0_table[2 * k + 1]
                p1_table[2 * k + 2] = p1_table[2 * k + 1]
    right = scores[d - 1] + 1.0
    if not right > scores[d - 1]:
        right = np.nextafter(scores[d - 1], np.inf)
    fill_cell(2 * d, float(right), None)

    for cell in range(n_cells):
        Multiprobability(float(p0_table[cell]), float(p1_table[cell]))
    return IvapCalibrator(
        scores=_frozen(scores),
        p0_table=_frozen(p0_table),
        p1_table=_frozen(p1_table),
        m=m,
        n_pos=n_pos,
        n_neg=n_neg,
    )
