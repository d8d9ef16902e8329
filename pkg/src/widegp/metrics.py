"""Calibration metrics over batches of categorical predictions."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

__all__ = [
    "ReliabilityBin",
    "CalibrationReport",
    "ece",
    "ece_bins",
    "brier",
    "categorical_nll",
    "entropy_and_confidence",
    "reliability_bins",
    "quartile_summary",
    "build_report",
]

NLL_FLOOR = 1e-12


def _confidence_matrix(predictions) -> np.ndarray:
    return np.vstack([p.confidences for p in predictions])


def _check(predictions, labels):
    if len(predictions) == 0:
        raise ValueError("empty prediction set")
    labels = np.asarray(labels)
    if labels.size != len(predictions):
        raise ValueError("prediction/label length mismatch")
    return labels


@dataclass(frozen=True)
class ReliabilityBin:
    lower: float
    upper: float
    count: int
    mean_confidence: float
    mean_accuracy: float


def ece(predictions, labels, n_bins: int = 10) -> float:
    """Expected calibration error with equal-width bins on max-confidence.

    Bins are [0, 0.1), ..., [0.9, 1.0]; empty bins contribute nothing.
    """
    labels = _check(predictions, labels)
    conf = np.array([p.confidences.max() for p in predictions])
    correct = np.array([p.predicted_class == y for p, y in zip(predictions, labels)],
                       dtype=float)
    idx = np.minimum((conf * n_bins).astype(int), n_bins - 1)
    total = 0.0
    for b in range(n_bins):
        mask = idx == b
        if not mask.any():
            continue
        total += mask.mean() * abs(correct[mask].mean() - conf[mask].mean())
    return float(total)


def ece_bins(predictions, labels, n_bins: int = 10) -> list[ReliabilityBin]:
    """The equal-width bin table underlying ``ece``."""
    labels = _check(predictions, labels)
    conf = np.array([p.confidences.max() for p in predictions])
    correct = np.array([p.predicted_class == y for p, y in zip(predictions, labels)],
                       dtype=float)
    idx = np.minimum((conf * n_bins).astype(int), n_bins - 1)
    bins = []
    for b in range(n_bins):
        mask = idx == b
        bins.append(ReliabilityBin(
            lower=b / n_bins, upper=(b + 1) / n_bins, count=int(mask.sum()),
            mean_confidence=float(conf[mask].mean()) if mask.any() else 0.0,
            mean_accuracy=float(correct[mask].mean()) if mask.any() else 0.0))
    return bins


def brier(predictions, labels) -> float:
    """Mean squared distance between the full confidence vector and the
    one-hot label (so the worst case is 2)."""
    labels = _check(predictions, labels)
    P = _confidence_matrix(predictions)
    onehot = np.zeros_like(P)
    onehot[np.arange(P.shape[0]), labels] = 1.0
    return float(np.mean(np.sum((P - onehot) ** 2, axis=1)))


def categorical_nll(predictions, labels) -> tuple[float, float]:
    """(-sum log p(true class), and its mean); log(0) floored at 1e-12."""
    labels = _check(predictions, labels)
    p_true = np.array([p.confidences[y] for p, y in zip(predictions, labels)])
    nll = -np.log(np.maximum(p_true, NLL_FLOOR))
    return float(nll.sum()), float(nll.mean())


def entropy_and_confidence(predictions) -> tuple[float, float]:
    """Mean Shannon entropy (nats) and mean max-confidence."""
    P = _confidence_matrix(predictions)
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(P > 0, P * np.log(P), 0.0)
    return float(-plogp.sum(axis=1).mean()), float(P.max(axis=1).mean())


def reliability_bins(predictions, labels, n_bins: int = 10) -> list[ReliabilityBin]:
    """Ten equal-count bins sorted by confidence (the diagram protocol,
    distinct from the equal-width binning used by ``ece``)."""
    labels = _check(predictions, labels)
    conf = np.array([p.confidences.max() for p in predictions])
    correct = np.array([p.predicted_class == y for p, y in zip(predictions, labels)],
                       dtype=float)
    order = np.argsort(conf, kind="stable")
    splits = np.array_split(order, n_bins)
    bins = []
    for part in splits:
        if part.size == 0:
            bins.append(ReliabilityBin(0.0, 0.0, 0, 0.0, 0.0))
            continue
        c = conf[part]
        bins.append(ReliabilityBin(
            lower=float(c.min()), upper=float(c.max()), count=int(part.size),
            mean_confidence=float(c.mean()),
            mean_accuracy=float(correct[part].mean())))
    return bins


def quartile_summary(values) -> tuple[float, float, float]:
    """(q25, q50, q75) with linear interpolation."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ValueError("no values to summarize")
    q = np.percentile(values, [25, 50, 75], method="linear")
    return float(q[0]), float(q[1]), float(q[2])


@dataclass
class CalibrationReport:
    """All calibration metrics of one evaluation run."""

    ece: float
    brier: float
    nll_sum: float
    nll_mean: float
    entropy_mean: float
    confidence_mean: float
    accuracy: float
    reliability_bins: list[ReliabilityBin] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reliability_bins"] = [asdict(b) for b in self.reliability_bins]
        return d


def build_report(predictions, labels, n_bins: int = 10) -> CalibrationReport:
    labels = _check(predictions, labels)
    nll_sum, nll_mean = categorical_nll(predictions, labels)
    entropy_mean, confidence_mean = entropy_and_confidence(predictions)
    correct = np.array([p.predicted_class == y for p, y in zip(predictions, labels)])
    return CalibrationReport(
        ece=ece(predictions, labels, n_bins),
        brier=brier(predictions, labels),
        nll_sum=nll_sum,
        nll_mean=nll_mean,
        entropy_mean=entropy_mean,
        confidence_mean=confidence_mean,
        accuracy=float(correct.mean()),
        reliability_bins=reliability_bins(predictions, labels, n_bins))
