"""vacal: Venn-Abers calibration toolkit for binary answer-token logits.

Turns raw answer-token logits from a binary text classifier into calibrated
probabilities via inductive Venn-Abers prediction, with a learned-temperature
baseline and an evaluation harness (ECE, Brier, AUC, macro-F1, reliability
diagrams, temperature sweeps).
"""

from .isotonic import IsotonicFit, WeightedPoint, evaluate, fit_pava, pool_duplicates
from .metrics import (
    MetricsReport,
    ReliabilityBins,
    auc,
    brier,
    ece,
    evaluate_all,
    f1_macro,
    reliability_bins,
)
from .records import (
    LogitRecord,
    ScoredExample,
    SplitSpec,
    read_records,
    read_scores_csv,
    split,
    transform_scores,
    write_records,
    write_scores_csv,
)
from .synth import SynthConfig, generate, planted_temperature, posterior
from .temperature import TemperatureModel, fit_temperature, scaled_prob
from .venn_abers import IvapCalibrator, Multiprobability, merge, predict_naive
from .venn_abers import fit as fit_ivap

__version__ = "0.1.0"

__all__ = [
    "IsotonicFit",
    "IvapCalibrator",
    "LogitRecord",
    "MetricsReport",
    "Multiprobability",
    "ReliabilityBins",
    "ScoredExample",
    "SplitSpec",
    "SynthConfig",
    "TemperatureModel",
    "WeightedPoint",
    "auc",
    "brier",
    "ece",
    "evaluate",
    "evaluate_all",
    "f1_macro",
    "fit_ivap",
    "fit_pava",
    "fit_temperature",
    "generate",
    "merge",
    "planted_temperature",
    "pool_duplicates",
    "posterior",
    "predict_naive",
    "read_records",
    "read_scores_csv",
    "reliability_bins",
    "scaled_prob",
    "split",
    "transform_scores",
    "write_records",
    "write_scores_csv",
]
