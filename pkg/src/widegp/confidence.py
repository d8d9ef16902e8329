"""Heuristic categorical confidences from Gaussian regression posteriors.

Three heuristics are supported: *exact* (Monte-Carlo probability that a
class attains the maximum under independent normals), *pairwise*
(product of one-vs-one normal CDF comparisons, normalized to sum to 1),
and *softmax* of the posterior mean.  Temperature scaling rescales the
posterior variances (sigma_T^2 = T sigma^2) for the first two and the
logits for the third.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtr

__all__ = [
    "HeuristicConfig",
    "CategoricalPrediction",
    "exact_confidence",
    "pairwise_confidence",
    "softmax_confidence",
    "confidences_from_posteriors",
    "fit_temperature",
]

KINDS = ("exact", "pairwise", "softmax")


@dataclass(frozen=True)
class HeuristicConfig:
    kind: str = "exact"
    temperature: float = 1.0
    n_mc: int = 2000
    seed: int = 0
    # the softmax heuristic divides logits by sqrt(T); set False for the
    # standard temperature-scaling convention of dividing by T
    sqrt_temperature: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown heuristic kind {self.kind!r}")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.n_mc < 1:
            raise ValueError("n_mc must be >= 1")


@dataclass
class CategoricalPrediction:
    """Normalized confidence vector and its argmax label."""

    confidences: np.ndarray
    predicted_class: int

    def __post_init__(self):
        self.confidences = np.asarray(self.confidences, dtype=float)
        if np.any(self.confidences < 0):
            raise ValueError("negative confidence")
        if abs(self.confidences.sum() - 1.0) > 1e-9:
            raise ValueError("confidences must sum to 1")


def _one_hot(index: int, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[index] = 1.0
    return v


def _prediction(confidences) -> CategoricalPrediction:
    confidences = np.asarray(confidences, dtype=float)
    confidences = confidences / confidences.sum()
    return CategoricalPrediction(confidences=confidences,
                                 predicted_class=int(np.argmax(confidences)))


def exact_confidence(posterior, config: HeuristicConfig,
                     rng=None) -> CategoricalPrediction:
    """Monte-Carlo P[class i attains the maximum] under N(mu_i, T sigma^2).

    Ties break to the lowest index; zero variance degenerates to the
    argmax indicator.
    """
    mu = np.asarray(posterior.mean, dtype=float)
    var = config.temperature * posterior.variance
    if var == 0.0:
        return _prediction(_one_hot(int(np.argmax(mu)), mu.size))
    if rng is None:
        rng = np.random.default_rng(config.seed)
    draws = mu[None, :] + np.sqrt(var) * rng.standard_normal((config.n_mc, mu.size))
    winners = np.argmax(draws, axis=1)
    counts = np.bincount(winners, minlength=mu.size).astype(float)
    return _prediction(counts / config.n_mc)


def pairwise_confidence(posterior, config: HeuristicConfig) -> CategoricalPrediction:
    """Scores prod_{j != i} Phi((mu_i - mu_j) / sqrt(T si^2 + T sj^2)),
    normalized by their sum; falls back to the argmax one-hot when all
    scores underflow to zero or the variance is zero.
    """
    mu = np.asarray(posterior.mean, dtype=float)
    var = config.temperature * posterior.variance
    if var == 0.0:
        return _prediction(_one_hot(int(np.argmax(mu)), mu.size))
    diff = (mu[:, None] - mu[None, :]) / np.sqrt(2.0 * var)
    cdf = ndtr(diff)
    np.fill_diagonal(cdf, 1.0)
    scores = np.prod(cdf, axis=1)
    if scores.sum() == 0.0:
        return _prediction(_one_hot(int(np.argmax(mu)), mu.size))
    return _prediction(scores)


def softmax_confidence(posterior_mean, temperature: float = 1.0,
                       sqrt_temperature: bool = True) -> CategoricalPrediction:
    """softmax(mu / sqrt(T)) (or mu / T with sqrt_temperature=False)."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    mu = np.asarray(posterior_mean, dtype=float)
    scale = np.sqrt(temperature) if sqrt_temperature else temperature
    logits = mu / scale
    logits = logits - logits.max()
    return _prediction(np.exp(logits))


def confidences_from_posteriors(posteriors, config: HeuristicConfig
                                ) -> list[CategoricalPrediction]:
    """Apply the configured heuristic to a batch of posteriors.

    The exact heuristic consumes one shared generator across the batch so
    batches are reproducible from ``config.seed``.
    """
    if config.kind == "softmax":
        return [softmax_confidence(p.mean, config.temperature,
                                   config.sqrt_temperature)
                for p in posteriors]
    if config.kind == "pairwise":
        return [pairwise_confidence(p, config) for p in posteriors]
    rng = np.random.default_rng(config.seed)
    return [exact_confidence(p, config, rng=rng) for p in posteriors]


def _validation_nll(posteriors, labels, config) -> float:
    preds = confidences_from_posteriors(posteriors, config)
    p_true = np.array([pred.confidences[y] for pred, y in zip(preds, labels)])
    return float(-np.mean(np.log(np.maximum(p_true, 1e-12))))


def fit_temperature(posteriors, labels, kind: str = "softmax",
                    base_config: HeuristicConfig | None = None) -> float:
    """Temperature minimizing validation categorical NLL.

    Searches a 41-point log grid over [1e-3, 1e3] (which contains T = 1),
    then refines around the grid optimum with a golden-section pass.
    Degenerate validation sets (identical predictions for every T) return
    T = 1 with a warning.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty validation set")
    if base_config is None:
        base_config = HeuristicConfig(kind=kind)
    else:
        base_config = replace(base_config, kind=kind)

    def nll(T):
        return _validation_nll(posteriors, labels, replace(base_config, temperature=T))

    grid = np.logspace(-3, 3, 41)
    values = [nll(T) for T in grid]
    if np.ptp(values) < 1e-12:
        warnings.warn("validation NLL is flat in temperature; returning T=1")
        return 1.0
    best = int(np.argmin(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]
    best_t, best_v = grid[best], values[best]

    # one golden-section pass over the bracketing interval, in log space
    phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = np.log(lo), np.log(hi)
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = nll(np.exp(c)), nll(np.exp(d))
    for _ in range(30):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = nll(np.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = nll(np.exp(d))
    for t, v in ((np.exp(c), fc), (np.exp(d), fd)):
        if v < best_v:
            best_t, best_v = t, v
    return float(best_t)
