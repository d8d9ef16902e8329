"""Bayesian multi-class classification with a softmax link over GP latents.

The latent functions F (one column per class) carry the Gaussian prior
N(0, K (x) I); the likelihood is prod_i softmax(F_i)[y_i].  The posterior
is sampled with elliptical slice sampling, rotating all class columns with
a single shared angle, and test predictions marginalize the exact Gaussian
conditional f | F by Monte Carlo.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp, softmax

from .kernels import KernelMatrix, cholesky_with_jitter
from .confidence import CategoricalPrediction

__all__ = [
    "EssConfig",
    "LatentState",
    "softmax_log_likelihood",
    "ess_step",
    "sample_posterior",
    "predict",
]


@dataclass(frozen=True)
class EssConfig:
    """Chain schedule for the slice sampler."""

    n_chains: int = 2
    burn_in: int = 1000
    n_samples: int = 1000
    thinning: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValueError("n_chains must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.n_samples < 0:
            raise ValueError("n_samples must be >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")


@dataclass
class LatentState:
    """Current latents (n_train x n_classes) and their log-likelihood.

    ``draw_seed`` is a stable per-state seed used for the conditional test
    draws, which makes predictions independent of the order in which kept
    samples are visited.  ``class_order`` maps the internal canonical
    column order back to the caller's class indices; it makes same-seed
    runs exactly equivariant under class relabeling, because the sampler's
    noise streams attach to the canonical columns rather than to the
    (arbitrary) class indices.
    """

    F: np.ndarray
    log_likelihood: float
    draw_seed: int = 0
    class_order: np.ndarray | None = None


def softmax_log_likelihood(F, labels) -> float:
    """sum_i [ F_i[y_i] - logsumexp(F_i) ], computed stably."""
    F = np.asarray(F, dtype=float)
    labels = np.asarray(labels)
    if np.any(labels < 0) or np.any(labels >= F.shape[1]):
        raise ValueError("label out of range")
    rows = np.arange(F.shape[0])
    return float(np.sum(F[rows, labels] - logsumexp(F, axis=1)))


def _prior_draw(prior_cholesky, n_classes, rng):
    n = prior_cholesky.shape[0]
    return prior_cholesky @ rng.standard_normal((n, n_classes))


def ess_step(state: LatentState, prior_cholesky, labels, rng,
             log_likelihood=None) -> LatentState:
    """One elliptical slice sampling update of the latent matrix.

    All class columns rotate with the same angle, which preserves the
    joint prior N(0, K (x) I).  ``log_likelihood`` defaults to the softmax
    likelihood of ``labels``; a custom callable F -> float may be passed
    for conjugate or prior-sampling checks.
    """
    if log_likelihood is None:
        log_likelihood = lambda F: softmax_log_likelihood(F, labels)
    F = state.F
    nu = _prior_draw(prior_cholesky, F.shape[1], rng)
    log_y = state.log_likelihood + np.log(rng.uniform())
    theta = rng.uniform(0.0, 2.0 * np.pi)
    theta_min, theta_max = theta - 2.0 * np.pi, theta
    while True:
        proposal = F * np.cos(theta) + nu * np.sin(theta)
        ll = log_likelihood(proposal)
        if np.isfinite(ll) and ll > log_y:
            return LatentState(F=proposal, log_likelihood=ll,
                               draw_seed=state.draw_seed,
                               class_order=state.class_order)
        if theta < 0:
            theta_min = theta
        else:
            theta_max = theta
        theta = rng.uniform(theta_min, theta_max)


def _canonical_order(labels, n_classes) -> np.ndarray:
    """Class indices ranked by first occurrence; absent classes follow."""
    order = []
    seen = set()
    for y in labels:
        y = int(y)
        if y not in seen:
            seen.add(y)
            order.append(y)
    order.extend(c for c in range(n_classes) if c not in seen)
    return np.asarray(order)


def sample_posterior(k_train, labels, config: EssConfig,
                     n_classes: int | None = None,
                     log_likelihood=None) -> list[LatentState]:
    """Run the chains and return the kept posterior samples.

    Each chain starts at a prior draw, discards ``burn_in`` steps, then
    keeps every ``thinning``-th state until ``n_samples`` are collected,
    so exactly n_chains * n_samples states come back.

    Internally the latent columns follow the canonical class order (by
    first occurrence in ``labels``); ``predict`` undoes the reordering, so
    relabeling the classes permutes the predictions exactly.
    """
    K = k_train.entries if isinstance(k_train, KernelMatrix) else np.asarray(k_train)
    labels = np.asarray(labels)
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 1
    L, _ = cholesky_with_jitter(K)
    class_order = None
    if log_likelihood is None:
        class_order = _canonical_order(labels, n_classes)
        rank = np.empty(n_classes, dtype=int)
        rank[class_order] = np.arange(n_classes)
        canon_labels = rank[labels]
        log_likelihood = lambda F: softmax_log_likelihood(F, canon_labels)

    kept: list[LatentState] = []
    for chain in range(config.n_chains):
        rng = np.random.default_rng(
            np.random.SeedSequence([config.seed, 7, chain]))
        F = _prior_draw(L, n_classes, rng)
        state = LatentState(F=F, log_likelihood=log_likelihood(F))
        for _ in range(config.burn_in):
            state = ess_step(state, L, labels, rng, log_likelihood)
        for k in range(config.n_samples):
            for _ in range(config.thinning):
                state = ess_step(state, L, labels, rng, log_likelihood)
            seed = int(np.random.SeedSequence(
                [config.seed, 13, chain, k]).generate_state(1)[0])
            kept.append(LatentState(F=state.F, log_likelihood=state.log_likelihood,
                                    draw_seed=seed, class_order=class_order))
    return kept


def predict(samples, k_cross, k_test_diag, prior_cholesky,
            n_inner: int = 4, rng=None) -> list[CategoricalPrediction]:
    """Monte-Carlo predictive class probabilities at the test points.

    For every kept F the test latents follow the exact Gaussian
    conditional with mean k_x K^-1 F and a per-point variance shared
    across classes; softmax draws are averaged over samples x n_inner.
    """
    Kc = k_cross.entries if isinstance(k_cross, KernelMatrix) else np.asarray(k_cross)
    diag = np.asarray(k_test_diag, dtype=float).ravel()
    L = prior_cholesky
    if Kc.shape[0] != diag.size:
        raise ValueError("test diagonal length does not match the cross block")
    if Kc.shape[1] != L.shape[0]:
        raise ValueError("cross kernel does not match the training kernel")
    if not samples:
        raise ValueError("no posterior samples given")
    W = solve_triangular(L, Kc.T, lower=True)            # n_train x n_test
    cond_sd = np.sqrt(np.maximum(diag - np.einsum("ij,ij->j", W, W), 0.0))

    n_test, n_classes = diag.size, samples[0].F.shape[1]
    contributions = []
    for state in samples:
        mean = W.T @ solve_triangular(L, state.F, lower=True)
        draw_rng = (np.random.default_rng(state.draw_seed)
                    if state.draw_seed else rng or np.random.default_rng())
        z = draw_rng.standard_normal((n_inner, n_test, n_classes))
        f = mean[None, :, :] + cond_sd[None, :, None] * z
        contributions.append((state.draw_seed, softmax(f, axis=2).sum(axis=0)))
    # summing in draw_seed order makes the result exactly independent of
    # the order in which kept samples were supplied
    contributions.sort(key=lambda pair: pair[0])
    acc = np.sum([c for _, c in contributions], axis=0)
    probs = acc / (len(samples) * n_inner)
    probs /= probs.sum(axis=1, keepdims=True)
    order = samples[0].class_order
    if order is not None:
        unmapped = np.empty_like(probs)
        unmapped[:, order] = probs
        probs = unmapped
    return [CategoricalPrediction(confidences=p, predicted_class=int(np.argmax(p)))
            for p in probs]
