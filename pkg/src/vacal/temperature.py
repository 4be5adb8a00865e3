"""Temperature-scaled softmax transforms and the learned-temperature baseline."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .records import LogitRecord, ScoredExample, softmax2_score, softmaxk_score

_PROB_CLAMP = 1e-12
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_KINDS = ("softmax2", "softmaxK")


@dataclass(frozen=True)
class TemperatureModel:
    """A fitted temperature: apply() rescales logits by ``tau_hat`` before softmax."""

    tau_hat: float
    kind: str
    final_nll: float
    grid_taus: tuple[float, ...] = field(default=(), repr=False)
    grid_losses: tuple[float, ...] = field(default=(), repr=False)

    def apply(self, records: Sequence[LogitRecord]) -> list[ScoredExample]:
        """scaled_prob at the fitted temperature, elementwise; labels copied."""
        return [ScoredExample(scaled_prob(r, self.kind, self.tau_hat), r.label) for r in records]

    def to_json(self) -> dict:
        return {"tau_hat": self.tau_hat, "kind": self.kind, "final_nll": self.final_nll}

    @classmethod
    def from_json(cls, obj: dict) -> "TemperatureModel":
        tau = obj["tau_hat"]
        if not (isinstance(tau, (int, float)) and tau > 0):
            raise ValueError(f"tau_hat must be positive, got {tau!r}")
        if obj["kind"] not in _KINDS:
            raise ValueError(f"unknown kind {obj['kind']!r}")
        return cls(tau_hat=float(tau), kind=obj["kind"], final_nll=float(obj["final_nll"]))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "TemperatureModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def scaled_prob(record: LogitRecord, kind: str, tau: float) -> float:
    """Positive-class probability of one record at temperature ``tau``.

    Same arithmetic as records.transform_scores, so tau=1 reproduces the
    plain softmax score.
    """
    if not (isinstance(tau, (int, float)) and tau > 0 and math.isfinite(tau)):
        raise ValueError(f"temperature must be a positive finite number, got {tau!r}")
    if kind == "softmax2":
        return softmax2_score(record.u_pos, record.u_neg, tau)
    if kind == "softmaxK":
        if record.full_logits is None:
            raise ValueError(f"record {record.id!r} lacks full_logits, required for softmaxK")
        return softmaxk_score(record.full_logits, record.pos_index, tau)
    raise ValueError(f"unknown transform kind {kind!r}")


def _expit(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _nll_from_probs(p: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(p, _PROB_CLAMP, 1.0 - _PROB_CLAMP)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def _make_loss(records: Sequence[LogitRecord], kind: str) -> Callable[[float], float]:
    y = np.array([r.label for r in records], dtype=np.float64)
    if kind == "softmax2":
        margins = np.array([r.u_pos - r.u_neg for r in records], dtype=np.float64)

        def loss(tau: float) -> float:
            return _nll_from_probs(_expit(margins / tau), y)

        return loss
    if kind == "softmaxK":
        for r in records:
            if r.full_logits is None:
                raise ValueError(f"record {r.id!r} lacks full_logits, required for softmaxK")
        widths = {len(r.full_logits) for r in records}
        if len(widths) != 1:
            raise ValueError(f"full_logits lengths differ across records: {sorted(widths)}")
        logits = np.array([r.full_logits for r in records], dtype=np.float64)
        pos_idx = np.array([r.pos_index for r in records])
        rows = np.arange(len(records))

        def loss(tau: float) -> float:
            scaled = logits / tau
            scaled -= scaled.max(axis=1, keepdims=True)
            exps = np.exp(scaled)
            p = exps[rows, pos_idx] / exps.sum(axis=1)
            return _nll_from_probs(p, y)

        return loss
    raise ValueError(f"unknown transform kind {kind!r}")


def _golden_section(f: Callable[[float], float], a: float, b: float, rel_tol: float) -> float:
    x1 = b - _INV_PHI * (b - a)
    x2 = a + _INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    while (b - a) > rel_tol * 0.5 * (a + b):
        if f1 <= f2:  # ties keep the left interval, biasing toward smaller tau
            b, x2, f2 = x2, x1, f1
            x1 = b - _INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (b - a)
            f2 = f(x2)
    return 0.5 * (a + b)


def fit_temperature(
    calibration: Sequence[LogitRecord],
    kind: str,
    bounds: tuple[float, float] = (0.01, 1000.0),
    grid_points: int = 200,
) -> TemperatureModel:
    """Learn the temperature minimizing mean NLL on the calibration records.

    Probabilities are clamped to [1e-12, 1 - 1e-12] so the loss stays finite.
    The search scans a log-spaced grid (the K-token loss need not be unimodal
    in tau), then refines by golden-section inside the bracketing interval to
    relative width 1e-6; ties resolve toward the smaller temperature.
    """
    records = list(calibration)
    if not records:
        raise ValueError("calibration must be non-empty")
    tau_min, tau_max = bounds
    if not (0 < tau_min < tau_max and math.isfinite(tau_max)):
        raise ValueError(f"bounds must satisfy 0 < tau_min < tau_max, got {bounds!r}")
    if grid_points < 2:
        raise ValueError(f"grid_points must be at least 2, got {grid_points}")

    loss = _make_loss(records, kind)
    grid = np.geomspace(tau_min, tau_max, grid_points)
    losses = np.array([loss(float(t)) for t in grid])
    best = int(np.argmin(losses))  # first minimum = smallest tau on ties

    lo = float(grid[best - 1]) if best > 0 else float(grid[best])
    hi = float(grid[best + 1]) if best + 1 < len(grid) else float(grid[best])
    if lo < hi:
        refined = _golden_section(loss, lo, hi, 1e-6)
        candidates = [(float(losses[best]), float(grid[best])), (loss(refined), refined)]
    else:
        candidates = [(float(losses[best]), float(grid[best]))]
    final_nll, tau_hat = min(candidates)

    return TemperatureModel(
        tau_hat=tau_hat,
        kind=kind,
        final_nll=final_nll,
        grid_taus=tuple(float(t) for t in grid),
        grid_losses=tuple(float(v) for v in losses),
    )
