"""Dataset ingestion, splitting, standardization, and synthetic shift."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "Dataset",
    "load_csv",
    "split",
    "standardize",
    "corrupt",
    "gaussian_blobs",
    "CORRUPTION_KINDS",
]

CORRUPTION_KINDS = ("gaussian_noise", "feature_blur", "feature_dropout",
                    "contrast_scale")


@dataclass
class Dataset:
    """Features plus either real-valued targets or integer class labels.

    ``provenance`` is set when the features come from an ingested
    pre-trained embedding file.  Standardization statistics are attached
    by ``standardize``.
    """

    features: np.ndarray
    targets: np.ndarray
    task: str  # "regression" | "classification"
    name: str = ""
    n_classes: int | None = None
    provenance: str | None = None
    feature_stats: tuple[np.ndarray, np.ndarray] | None = None
    target_stats: tuple[np.ndarray, np.ndarray] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError("features must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("non-finite feature values")
        if self.task == "classification":
            self.targets = np.asarray(self.targets, dtype=int)
            if self.targets.ndim != 1:
                raise ValueError("classification labels must be a vector")
            if self.n_classes is None:
                self.n_classes = int(self.targets.max()) + 1
            if np.any(self.targets < 0) or np.any(self.targets >= self.n_classes):
                raise ValueError("label out of range")
        elif self.task == "regression":
            self.targets = np.asarray(self.targets, dtype=float)
            if self.targets.ndim == 1:
                self.targets = self.targets[:, None]
            if not np.all(np.isfinite(self.targets)):
                raise ValueError("non-finite target values")
        else:
            raise ValueError(f"unknown task {self.task!r}")
        if self.targets.shape[0] != self.features.shape[0]:
            raise ValueError("feature/target row mismatch")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        return replace(self, features=self.features[indices],
                       targets=self.targets[indices])


def load_csv(path, task: str, n_targets: int = 1, name: str = "") -> Dataset:
    """Parse a header-row CSV with feature columns followed by target
    column(s).  A leading ``# embedding: <provenance>`` comment marks an
    embedding file and is recorded as provenance.
    """
    provenance = None
    rows = []
    with open(path, newline="") as fh:
        first = fh.readline()
        if first.startswith("# embedding:"):
            provenance = first.split(":", 1)[1].strip()
            header = fh.readline()
        else:
            header = first
        if not header.strip():
            raise ValueError(f"{path}: missing header row")
        columns = next(csv.reader([header]))
        if len(columns) < n_targets + 1:
            raise ValueError(f"{path}: expected at least {n_targets + 1} columns")
        for lineno, row in enumerate(csv.reader(fh), start=2 + (provenance is not None)):
            if not row:
                continue
            if len(row) != len(columns):
                raise ValueError(f"{path}: row {lineno} has {len(row)} fields, "
                                 f"expected {len(columns)}")
            parsed = []
            for col, cell in enumerate(row, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError as exc:
                    raise ValueError(
                        f"{path}: row {lineno}, column {col}: "
                        f"cannot parse {cell!r}") from exc
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    features, targets = data[:, :-n_targets], data[:, -n_targets:]
    if task == "classification":
        if n_targets != 1:
            raise ValueError("classification expects a single label column")
        labels = targets.ravel()
        if np.any(labels != np.round(labels)):
            raise ValueError(f"{path}: non-integer class labels")
        targets = labels.astype(int)
    return Dataset(features=features, targets=targets, task=task,
                   name=name or str(path), provenance=provenance)


def split(dataset: Dataset, seed: int, ratios=(0.8, 0.1, 0.1)):
    """Deterministic shuffled (train, valid, test) split.

    Classification splits are stratified per label.  Raises if any part
    would be empty.
    """
    ratios = tuple(float(r) for r in ratios)
    if abs(sum(ratios) - 1.0) > 1e-9 or len(ratios) != 3:
        raise ValueError("ratios must be three values summing to 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 101]))

    def cut(indices):
        n = indices.size
        a = int(np.floor(n * ratios[0]))
        b = int(np.floor(n * (ratios[0] + ratios[1])))
        return indices[:a], indices[a:b], indices[b:]

    if dataset.task == "classification":
        parts = ([], [], [])
        for cls in range(dataset.n_classes):
            idx = np.flatnonzero(dataset.targets == cls)
            rng.shuffle(idx)
            for bucket, piece in zip(parts, cut(idx)):
                bucket.append(piece)
        train, valid, test = (np.concatenate(p) for p in parts)
    else:
        idx = rng.permutation(dataset.n)
        train, valid, test = cut(idx)
    for part, label in ((train, "train"), (valid, "valid"), (test, "test")):
        if part.size == 0:
            raise ValueError(f"{label} split received zero rows")
    return dataset.subset(np.sort(train)), dataset.subset(np.sort(valid)), \
        dataset.subset(np.sort(test))


def standardize(train: Dataset, *others: Dataset):
    """Z-score features (and regression targets) using train statistics.

    Zero-variance columns map to 0.  Returns the standardized train set
    followed by the other sets transformed with the same statistics.
    """
    f_mean = train.features.mean(axis=0)
    f_std = train.features.std(axis=0)
    f_scale = np.where(f_std > 0, f_std, 1.0)
    if train.task == "regression":
        t_mean = train.targets.mean(axis=0)
        t_std = train.targets.std(axis=0)
        t_scale = np.where(t_std > 0, t_std, 1.0)
    out = []
    for ds in (train, *others):
        feats = (ds.features - f_mean) / f_scale
        feats[:, f_std == 0] = 0.0
        kwargs = dict(features=feats, feature_stats=(f_mean, f_std))
        if train.task == "regression":
            targ = (ds.targets - t_mean) / t_scale
            targ[:, t_std == 0] = 0.0
            kwargs.update(targets=targ, target_stats=(t_mean, t_std))
        out.append(replace(ds, **kwargs))
    return tuple(out)


def unstandardize_targets(values: np.ndarray, dataset: Dataset) -> np.ndarray:
    """Undo target standardization recorded on ``dataset``."""
    if dataset.target_stats is None:
        return values
    mean, std = dataset.target_stats
    return values * np.where(std > 0, std, 1.0) + mean


def corrupt(dataset: Dataset, kind: str, intensity: int, seed: int) -> Dataset:
    """Deterministic feature-space corruption at intensity 1..5.

    gaussian_noise  adds N(0, (0.1 i sd_j)^2) per feature j;
    feature_blur    averages each feature over an index window of width 2i+1;
    feature_dropout zeroes a fraction 0.05 i of features per row;
    contrast_scale  shrinks centered features by (1 - 0.15 i).
    Targets are untouched.
    """
    if kind not in CORRUPTION_KINDS:
        raise ValueError(f"unknown corruption kind {kind!r}")
    if intensity not in (1, 2, 3, 4, 5):
        raise ValueError("intensity must be in 1..5")
    X = dataset.features
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 211,
                                                        CORRUPTION_KINDS.index(kind),
                                                        intensity]))
    if kind == "gaussian_noise":
        sd = X.std(axis=0)
        X = X + rng.standard_normal(X.shape) * (0.1 * intensity) * sd
    elif kind == "feature_blur":
        half = intensity
        kernel = np.ones(2 * half + 1)
        d = X.shape[1]
        # centered slice of the full convolution; window truncated at the
        # edges (and when the window is wider than the feature vector)
        counts = np.convolve(np.ones(d), kernel, mode="full")[half:half + d]
        X = np.apply_along_axis(
            lambda row: np.convolve(row, kernel, mode="full")[half:half + d]
            / counts, 1, X)
    elif kind == "feature_dropout":
        frac = 0.05 * intensity
        n_drop = int(round(frac * X.shape[1]))
        X = X.copy()
        for i in range(X.shape[0]):
            drop = rng.choice(X.shape[1], size=n_drop, replace=False)
            X[i, drop] = 0.0
    else:  # contrast_scale
        mean = X.mean(axis=0)
        X = (X - mean) * (1.0 - 0.15 * intensity) + mean
    return replace(dataset, features=X)


def gaussian_blobs(n: int, n_classes: int = 4, seed: int = 0,
                   center_distance: float = 4.0, std: float = 0.8,
                   d: int = 2) -> Dataset:
    """Separable Gaussian-blob classification data on a circle of centers."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 307]))
    angles = 2.0 * np.pi * np.arange(n_classes) / n_classes
    centers = np.zeros((n_classes, d))
    centers[:, 0] = 0.5 * center_distance * np.cos(angles)
    centers[:, 1 % d] = 0.5 * center_distance * np.sin(angles)
    labels = rng.integers(0, n_classes, size=n)
    features = centers[labels] + std * rng.standard_normal((n, d))
    return Dataset(features=features, targets=labels, task="classification",
                   name="blobs", n_classes=n_classes)
