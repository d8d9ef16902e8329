"""Kernels of infinite-width fully-connected networks, plus a standard RBF.

The fully-connected kernels are built by the layerwise recurrence: the
first-layer pre-activation covariance is

    k1(x, x') = sigma_w^2 <x, x'> / n0 + sigma_b^2,

and every subsequent layer maps a covariance triple (kxx, kxx', kx'x')
through the closed-form Gaussian expectation of the activation,

    k_{l+1} = sigma_w^2 E[phi(u) phi(v)] + sigma_b^2,   (u, v) ~ N(0, K_l).

The tangent kernel of the same architecture follows the companion
recursion  theta_{l+1} = k_{l+1} + sigma_w^2 * E[phi'(u) phi'(v)] * theta_l.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "KernelConfig",
    "KernelMatrix",
    "base_kernel",
    "relu_moment",
    "erf_moment",
    "relu_derivative_moment",
    "erf_derivative_moment",
    "nngp_matrix",
    "ntk_matrix",
    "rbf_matrix",
    "gram",
    "kernel_diag",
    "cholesky_with_jitter",
]

# Tolerance before an out-of-range correlation is treated as an error
# rather than round-off and clamped.
CLAMP_TOL = 1e-9

FAMILIES = ("nngp", "ntk", "rbf")
ACTIVATIONS = ("relu", "erf")


@dataclass(frozen=True)
class KernelConfig:
    """Hyperparameters of a neural (or RBF) kernel.

    ``readout_weight_variance``/``readout_bias_variance`` default to the
    body values when left as None.  ``rbf_beta``/``rbf_gamma`` are only
    meaningful for the rbf family, and the network fields only for
    nngp/ntk.
    """

    family: str = "nngp"
    activation: str = "relu"
    depth: int = 1
    weight_variance: float = 1.0
    bias_variance: float = 0.0
    readout_weight_variance: float | None = None
    readout_bias_variance: float | None = None
    kernel_scale: float = 1.0
    diagonal_regularizer: float = 0.0
    rbf_beta: float = 1.0
    rbf_gamma: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family != "rbf" and self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.depth < 0 or int(self.depth) != self.depth:
            raise ValueError("depth must be a non-negative integer")
        if self.weight_variance <= 0:
            raise ValueError("weight_variance must be positive")
        if self.bias_variance < 0:
            raise ValueError("bias_variance must be non-negative")
        if self.kernel_scale <= 0:
            raise ValueError("kernel_scale must be positive")
        if self.diagonal_regularizer < 0:
            raise ValueError("diagonal_regularizer must be non-negative")
        if self.family == "rbf":
            if self.rbf_beta <= 0:
                raise ValueError("rbf_beta must be positive")
            if self.rbf_gamma < 0:
                raise ValueError("rbf_gamma must be non-negative")

    @property
    def readout_w(self) -> float:
        return (self.weight_variance if self.readout_weight_variance is None
                else self.readout_weight_variance)

    @property
    def readout_b(self) -> float:
        return (self.bias_variance if self.readout_bias_variance is None
                else self.readout_bias_variance)

    def with_scale(self, kernel_scale: float) -> "KernelConfig":
        return replace(self, kernel_scale=kernel_scale)


@dataclass
class KernelMatrix:
    """A realized Gram matrix, optionally flagged square-symmetric."""

    entries: np.ndarray
    is_square_symmetric: bool = False

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        if self.entries.ndim != 2:
            raise ValueError("kernel entries must be a 2-D matrix")
        if not np.all(np.isfinite(self.entries)):
            raise ValueError("kernel entries must be finite")
        if self.is_square_symmetric and self.rows != self.cols:
            raise ValueError("square-symmetric flag on a non-square matrix")

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]


def _check_psd_inputs(kxx, kxpxp):
    kxx = np.asarray(kxx, dtype=float)
    kxpxp = np.asarray(kxpxp, dtype=float)
    if np.any(kxx < 0) or np.any(kxpxp < 0):
        raise ValueError("diagonal covariance entries must be non-negative")
    return kxx, kxpxp


def _correlation(kxx_prime, scale):
    """Clamped correlation kxx'/scale, with 0/0 -> 0 (degenerate inputs)."""
    kxx_prime = np.asarray(kxx_prime, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(scale > 0, kxx_prime / np.where(scale > 0, scale, 1.0), 0.0)
    if np.any(np.abs(rho) > 1.0 + CLAMP_TOL):
        raise ValueError("cross covariance violates Cauchy-Schwarz beyond tolerance")
    return np.clip(rho, -1.0, 1.0)


def relu_moment(kxx, kxx_prime, kxpxp):
    """E[relu(u) relu(v)] for (u, v) ~ N(0, [[kxx, kxx'], [kxx', kx'x']]).

    Arc-cosine closed form: sqrt(kxx kx'x') (sin t + (pi - t) cos t) / 2pi
    with t = arccos(rho).  Accepts scalars or broadcastable arrays.
    """
    kxx, kxpxp = _check_psd_inputs(kxx, kxpxp)
    scale = np.sqrt(kxx * kxpxp)
    rho = _correlation(kxx_prime, scale)
    theta = np.arccos(rho)
    out = scale / (2.0 * np.pi) * (np.sin(theta) + (np.pi - theta) * np.cos(theta))
    return out if out.ndim else float(out)


def erf_moment(kxx, kxx_prime, kxpxp):
    """E[erf(u) erf(v)]: (2/pi) arcsin(2 kxx' / sqrt((1+2kxx)(1+2kx'x')))."""
    kxx, kxpxp = _check_psd_inputs(kxx, kxpxp)
    kxx_prime = np.asarray(kxx_prime, dtype=float)
    arg = 2.0 * kxx_prime / np.sqrt((1.0 + 2.0 * kxx) * (1.0 + 2.0 * kxpxp))
    if np.any(np.abs(arg) > 1.0 + CLAMP_TOL):
        raise ValueError("arcsin argument out of range beyond tolerance")
    out = (2.0 / np.pi) * np.arcsin(np.clip(arg, -1.0, 1.0))
    return out if out.ndim else float(out)


def relu_derivative_moment(kxx, kxx_prime, kxpxp):
    """E[1{u>0} 1{v>0}] = (pi - arccos(rho)) / 2pi; 0 on degenerate input."""
    kxx, kxpxp = _check_psd_inputs(kxx, kxpxp)
    scale = np.sqrt(kxx * kxpxp)
    rho = _correlation(kxx_prime, scale)
    out = np.where(scale > 0, (np.pi - np.arccos(rho)) / (2.0 * np.pi), 0.0)
    return out if out.ndim else float(out)


def erf_derivative_moment(kxx, kxx_prime, kxpxp):
    """E[erf'(u) erf'(v)] = (4/pi) / sqrt((1+2kxx)(1+2kx'x') - 4 kxx'^2)."""
    kxx, kxpxp = _check_psd_inputs(kxx, kxpxp)
    kxx_prime = np.asarray(kxx_prime, dtype=float)
    det = (1.0 + 2.0 * kxx) * (1.0 + 2.0 * kxpxp) - 4.0 * kxx_prime ** 2
    if np.any(det <= 0):
        raise ValueError("degenerate covariance in erf derivative moment")
    out = (4.0 / np.pi) / np.sqrt(det)
    return out if out.ndim else float(out)


_MOMENTS = {"relu": relu_moment, "erf": erf_moment}
_DERIVATIVE_MOMENTS = {"relu": relu_derivative_moment, "erf": erf_derivative_moment}


def base_kernel(x, x_prime, config: KernelConfig) -> float:
    """First-layer pre-activation covariance sw^2 <x, x'>/n0 + sb^2."""
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if x.shape != x_prime.shape or x.ndim != 1 or x.size < 1:
        raise ValueError("inputs must be equal-length non-empty vectors")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(x_prime))):
        raise ValueError("non-finite input")
    return float(config.weight_variance * (x @ x_prime) / x.size
                 + config.bias_variance)


def _as_features(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 1:
        raise ValueError("expected a 2-D feature matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite features")
    return X


def _base_blocks(X, Xp, config):
    n0 = X.shape[1]
    sw, sb = config.weight_variance, config.bias_variance
    cross = sw * (X @ Xp.T) / n0 + sb
    dx = sw * np.einsum("ij,ij->i", X, X) / n0 + sb
    dxp = sw * np.einsum("ij,ij->i", Xp, Xp) / n0 + sb
    return cross, dx, dxp


def _fc_recursion(X, Xp, config: KernelConfig, with_ntk: bool):
    """Run the layer recursion for the cross block and both diagonals.

    The diagonals of X and Xp are recursed separately so the cross block
    never needs the joint (m + m') x (m + m') Gram.
    """
    moment = _MOMENTS[config.activation]
    dmoment = _DERIVATIVE_MOMENTS[config.activation]
    cross, dx, dxp = _base_blocks(X, Xp, config)
    theta = cross.copy() if with_ntk else None
    theta_dx = dx.copy() if with_ntk else None
    theta_dxp = dxp.copy() if with_ntk else None

    for layer in range(config.depth):
        readout = layer == config.depth - 1
        sw = config.readout_w if readout else config.weight_variance
        sb = config.readout_b if readout else config.bias_variance
        new_cross = sw * moment(dx[:, None], cross, dxp[None, :]) + sb
        new_dx = sw * moment(dx, dx, dx) + sb
        new_dxp = sw * moment(dxp, dxp, dxp) + sb
        if with_ntk:
            theta = new_cross + sw * dmoment(dx[:, None], cross, dxp[None, :]) * theta
            theta_dx = new_dx + sw * dmoment(dx, dx, dx) * theta_dx
            theta_dxp = new_dxp + sw * dmoment(dxp, dxp, dxp) * theta_dxp
        cross, dx, dxp = new_cross, new_dx, new_dxp

    return cross, dx, dxp, theta, theta_dx, theta_dxp


def _finish(entries, config, square):
    entries = config.kernel_scale * entries
    if square:
        entries = 0.5 * (entries + entries.T)
        entries = entries + config.diagonal_regularizer * np.eye(entries.shape[0])
    return KernelMatrix(entries, is_square_symmetric=square)


def nngp_matrix(X, X_prime=None, config: KernelConfig | None = None) -> KernelMatrix:
    """NNGP Gram matrix K(X, X') of the configured fully-connected network.

    With ``X_prime=None`` the square train-train block is built, symmetry
    is enforced, and the configured diagonal regularizer is added.
    """
    if config is None:
        raise ValueError("config is required")
    X = _as_features(X)
    square = X_prime is None
    Xp = X if square else _as_features(X_prime)
    if X.shape[1] != Xp.shape[1]:
        raise ValueError("feature dimension mismatch")
    cross, _, _, _, _, _ = _fc_recursion(X, Xp, config, with_ntk=False)
    return _finish(cross, config, square)


def ntk_matrix(X, X_prime=None, config: KernelConfig | None = None):
    """Both kernels of the architecture: (nngp, ntk) as KernelMatrix pair.

    Depth 0 gives ntk == nngp == base kernel.  Scale and regularizer are
    applied to both, as for ``nngp_matrix``.
    """
    if config is None:
        raise ValueError("config is required")
    X = _as_features(X)
    square = X_prime is None
    Xp = X if square else _as_features(X_prime)
    if X.shape[1] != Xp.shape[1]:
        raise ValueError("feature dimension mismatch")
    cross, _, _, theta, _, _ = _fc_recursion(X, Xp, config, with_ntk=True)
    return _finish(cross, config, square), _finish(theta, config, square)


def rbf_matrix(X, X_prime=None, config: KernelConfig | None = None) -> KernelMatrix:
    """beta * exp(-gamma ||x - x'||^2); regularizer added on the square case."""
    if config is None:
        raise ValueError("config is required")
    X = _as_features(X)
    square = X_prime is None
    Xp = X if square else _as_features(X_prime)
    sq = cdist(X, Xp, metric="sqeuclidean")
    entries = config.rbf_beta * np.exp(-config.rbf_gamma * sq)
    if square:
        entries = 0.5 * (entries + entries.T)
        entries = entries + config.diagonal_regularizer * np.eye(entries.shape[0])
    return KernelMatrix(entries, is_square_symmetric=square)


def gram(X, X_prime=None, config: KernelConfig | None = None) -> KernelMatrix:
    """Family dispatch; for the ntk family returns the tangent kernel."""
    if config.family == "rbf":
        return rbf_matrix(X, X_prime, config)
    if config.family == "ntk":
        return ntk_matrix(X, X_prime, config)[1]
    return nngp_matrix(X, X_prime, config)


def kernel_diag(X, config: KernelConfig) -> np.ndarray:
    """Diagonal K(x, x) per row of X, without the diagonal regularizer.

    Runs only the O(m d) diagonal recursion (or the constant beta for RBF).
    For the ntk family this is the tangent-kernel diagonal.
    """
    X = _as_features(X)
    if config.family == "rbf":
        return np.full(X.shape[0], config.rbf_beta)
    moment = _MOMENTS[config.activation]
    dmoment = _DERIVATIVE_MOMENTS[config.activation]
    sw0, sb0 = config.weight_variance, config.bias_variance
    dx = sw0 * np.einsum("ij,ij->i", X, X) / X.shape[1] + sb0
    theta_dx = dx.copy()
    for layer in range(config.depth):
        readout = layer == config.depth - 1
        sw = config.readout_w if readout else sw0
        sb = config.readout_b if readout else sb0
        new_dx = sw * moment(dx, dx, dx) + sb
        theta_dx = new_dx + sw * dmoment(dx, dx, dx) * theta_dx
        dx = new_dx
    d = theta_dx if config.family == "ntk" else dx
    return config.kernel_scale * d


def cholesky_with_jitter(matrix: np.ndarray, max_tries: int = 5):
    """Lower Cholesky factor, escalating diagonal jitter on failure.

    Starts at 1e-6 * mean(diag) and multiplies by 10 up to 1e-2 * mean(diag).
    Returns (factor, jitter_added).  Raises np.linalg.LinAlgError when the
    matrix is still indefinite at the largest jitter.
    """
    matrix = np.asarray(matrix, dtype=float)
    try:
        return np.linalg.cholesky(matrix), 0.0
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(matrix)))
    if scale <= 0:
        scale = 1.0
    jitter = 1e-6 * scale
    eye = np.eye(matrix.shape[0])
    for _ in range(max_tries):
        try:
            return np.linalg.cholesky(matrix + jitter * eye), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
            if jitter > 1e-2 * scale * (1 + 1e-12):
                break
    raise np.linalg.LinAlgError("matrix is not positive definite after jitter")
