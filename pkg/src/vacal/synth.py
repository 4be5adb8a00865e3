"""Synthetic logit generator with an exact analytic posterior.

Labels are Bernoulli(prior); the positive-token logit is a Gaussian latent
with class means +/-mu and scale sigma (the negative-token logit is 0).
Under this model the Bayes posterior is exactly a temperature-scaled
two-token softmax, with optimal temperature sigma^2 / (2 mu) when the
prior is 1/2, giving closed-form ground truth for calibration tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .records import LogitRecord, _logistic


@dataclass(frozen=True)
class SynthConfig:
    """Generator parameters; ``n`` examples from the planted-posterior model."""

    n: int
    prior: float = 0.5
    mu: float = 1.0
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        if not 0.0 < self.prior < 1.0:
            raise ValueError(f"prior must lie in (0, 1), got {self.prior!r}")
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu!r}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")


def posterior(config: SynthConfig, d: float) -> float:
    """Exact Bayes posterior P(label=1 | latent d) of the generative model."""
    log_odds_prior = math.log(config.prior / (1.0 - config.prior))
    return _logistic(log_odds_prior + 2.0 * config.mu * d / config.sigma**2)


def planted_temperature(config: SynthConfig) -> float:
    """The temperature at which the two-token softmax equals the posterior
    (exact for prior 1/2)."""
    return config.sigma**2 / (2.0 * config.mu)


def generate(config: SynthConfig) -> list[LogitRecord]:
    """Draw n records, deterministic given the seed.

    Randomness comes from a PCG64 stream consumed as three blocks of n
    uniforms: label draws (u < prior), then the two Box-Muller inputs.
    Normal variates use the cosine branch, z = sqrt(-2 ln(1-u1)) cos(2 pi u2),
    with 1-u1 in (0, 1] so the log never sees zero.
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    labels = rng.random(config.n) < config.prior
    u1 = rng.random(config.n)
    u2 = rng.random(config.n)
    z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
    d = np.where(labels, config.mu, -config.mu) + config.sigma * z
    return [
        LogitRecord(
            id=f"synth-{i:08d}",
            u_pos=float(d[i]),
            u_neg=0.0,
            label=int(labels[i]),
            true_posterior=posterior(config, float(d[i])),
        )
        for i in range(config.n)
    ]
