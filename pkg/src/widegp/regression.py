"""Exact GP regression and the closed-form training dynamics of the
tangent kernel.

Posterior at a test point x:

    mu(x)      = k(x, X) (K + s^2 I)^-1 Y
    sigma^2(x) = k(x, x) - k(x, X) (K + s^2 I)^-1 k(X, x)

The multi-output prior factorizes over output dimensions (covariance
K (x) I), so the mean is solved columnwise and the variance is shared.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import KernelMatrix, cholesky_with_jitter

__all__ = [
    "GaussianPosterior",
    "GprModel",
    "NtkDynamics",
    "fit",
    "predict",
    "gaussian_nll",
    "ntk_predict",
]


@dataclass
class GaussianPosterior:
    """Predictive mean per output dimension and the shared scalar variance."""

    mean: np.ndarray
    variance: float

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if not np.all(np.isfinite(self.mean)):
            raise ValueError("non-finite posterior mean")
        if self.variance < -1e-10:
            raise ValueError("negative posterior variance")
        self.variance = max(float(self.variance), 0.0)


@dataclass
class GprModel:
    """Immutable state of a fitted GP regressor."""

    cholesky_factor: np.ndarray
    alpha: np.ndarray
    noise_variance: float

    @property
    def n_train(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.alpha.shape[1]


@dataclass(frozen=True)
class NtkDynamics:
    """Gradient-flow schedule; time may be math.inf for the trained limit."""

    learning_rate: float = 1.0
    time: float = np.inf

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.time < 0:
            raise ValueError("time must be non-negative")


def _entries(k) -> np.ndarray:
    return k.entries if isinstance(k, KernelMatrix) else np.asarray(k, dtype=float)


def fit(k_train, targets, noise_variance: float = 0.0) -> GprModel:
    """Factorize K + s^2 I and pre-solve for alpha = (K + s^2 I)^-1 Y."""
    K = _entries(k_train)
    if K.shape[0] != K.shape[1]:
        raise ValueError("training kernel must be square")
    if noise_variance < 0:
        raise ValueError("noise_variance must be non-negative")
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != K.shape[0]:
        raise ValueError("target row count does not match the kernel")
    L, _ = cholesky_with_jitter(K + noise_variance * np.eye(K.shape[0]))
    alpha = solve_triangular(L.T, solve_triangular(L, Y, lower=True), lower=False)
    return GprModel(cholesky_factor=L, alpha=alpha, noise_variance=noise_variance)


def predict(model: GprModel, k_cross, k_test_diag) -> list[GaussianPosterior]:
    """Posterior mean and variance at each test point.

    ``k_cross`` is the n_test x n_train block and ``k_test_diag`` the
    prior variances K(x, x).  Variances are clamped at zero.
    """
    Kc = _entries(k_cross)
    diag = np.asarray(k_test_diag, dtype=float).ravel()
    if Kc.shape[1] != model.n_train:
        raise ValueError("cross kernel column count does not match n_train")
    if Kc.shape[0] != diag.size:
        raise ValueError("test diagonal length does not match the cross block")
    means = Kc @ model.alpha
    W = solve_triangular(model.cholesky_factor, Kc.T, lower=True)
    variances = np.maximum(diag - np.einsum("ij,ij->j", W, W), 0.0)
    return [GaussianPosterior(mean=m, variance=v) for m, v in zip(means, variances)]


def gaussian_nll(posteriors, targets, noise_variance: float = 0.0) -> float:
    """Mean per-point Gaussian negative log-likelihood, summed over outputs.

    The predictive variance includes the observation noise.  Zero total
    variance is floored at 1e-12, so a mismatch yields a large but finite
    value instead of an infinity.
    """
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if len(posteriors) != Y.shape[0]:
        raise ValueError("posterior/target length mismatch")
    total = 0.0
    for post, y in zip(posteriors, Y):
        var = max(post.variance + noise_variance, 1e-12)
        resid = y - post.mean
        total += float(np.sum(0.5 * np.log(2.0 * np.pi * var)
                              + resid ** 2 / (2.0 * var)))
    return total / len(posteriors)


def _spectral_map(theta_train, learning_rate, time):
    """Q diag(g(lam)) Q^T with g = (1 - exp(-eta lam t)) / lam.

    g has the finite limit eta*t as lam -> 0; at t = inf it is 1/lam with
    small eigenvalues floored to keep the inverse stable.
    """
    lam, Q = np.linalg.eigh(0.5 * (theta_train + theta_train.T))
    if np.isinf(time):
        floor = max(lam.max(), 0.0) * 1e-12 + 1e-300
        g = 1.0 / np.maximum(lam, floor)
    else:
        x = learning_rate * time * lam
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(np.abs(lam) > 1e-14 * max(lam.max(), 1.0),
                         -np.expm1(-x) / np.where(lam == 0, 1.0, lam),
                         learning_rate * time)
    return (Q * g) @ Q.T


def ntk_predict(nngp_blocks, ntk_blocks, targets, dynamics: NtkDynamics):
    """Ensemble-training posterior of gradient flow under the tangent kernel.

    ``nngp_blocks`` and ``ntk_blocks`` are (train_train, test_train,
    test_test) triples.  Returns (posteriors, test_covariance): the mean
    at time t is

        mu = Th_TX Th^-1 (I - exp(-eta Th t)) Y

    and the covariance couples the initial-function kernel K with the
    same spectral factor.  t = 0 gives mean 0 and covariance K_TT; at
    t = inf the mean is plain kernel regression with Th.
    """
    k_train, k_cross, k_test = (_entries(b) for b in nngp_blocks)
    th_train, th_cross, th_test = (_entries(b) for b in ntk_blocks)
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n = k_train.shape[0]
    if not (th_train.shape == (n, n) and Y.shape[0] == n):
        raise ValueError("block shapes are inconsistent")

    B = th_cross @ _spectral_map(th_train, dynamics.learning_rate, dynamics.time)
    means = B @ Y
    cov = (k_test + B @ k_train @ B.T
           - (B @ k_cross.T + (B @ k_cross.T).T))
    cov = 0.5 * (cov + cov.T)
    variances = np.maximum(np.diag(cov), 0.0)
    posteriors = [GaussianPosterior(mean=m, variance=v)
                  for m, v in zip(means, variances)]
    return posteriors, cov
