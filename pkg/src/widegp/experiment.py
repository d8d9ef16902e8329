"""End-to-end experiment orchestration and result persistence."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace, asdict
from pathlib import Path

import numpy as np

from . import classification, regression
from .confidence import (HeuristicConfig, confidences_from_posteriors,
                         fit_temperature)
from .data import CORRUPTION_KINDS, Dataset, corrupt, split, standardize, \
    unstandardize_targets
from .kernels import KernelConfig, cholesky_with_jitter, gram, kernel_diag
from .metrics import build_report, quartile_summary
from .records import FORMAT_VERSION, RunRecord, to_jsonable

__all__ = ["ExperimentSpec", "run_experiment", "kernel_from_cell",
           "make_gpr_pipeline", "write_results"]

QUARTILE_METRICS = ("ece", "brier", "nll_mean", "accuracy", "confidence_mean",
                    "rmse", "gaussian_nll")


@dataclass
class ExperimentSpec:
    """Full description of one experiment run."""

    dataset: Dataset
    model: str = "gpr"  # gpr | gpc
    kernel: KernelConfig = field(default_factory=KernelConfig)
    noise_variance: float = 1e-2
    ess: classification.EssConfig = field(default_factory=classification.EssConfig)
    heuristic: HeuristicConfig = field(default_factory=HeuristicConfig)
    fit_heuristic_temperature: bool = False
    split_seed: int = 0
    ratios: tuple = (0.8, 0.1, 0.1)
    corruption_kinds: tuple = ()
    intensities: tuple = ()
    corruption_seed: int = 0
    name: str = "experiment"
    n_bins: int = 10

    def config_snapshot(self) -> dict:
        snap = {
            "name": self.name,
            "model": self.model,
            "task": self.dataset.task,
            "kernel": asdict(self.kernel),
            "noise_variance": self.noise_variance,
            "heuristic": asdict(self.heuristic),
            "fit_heuristic_temperature": self.fit_heuristic_temperature,
            "split_seed": self.split_seed,
            "ratios": list(self.ratios),
            "corruption_kinds": list(self.corruption_kinds),
            "intensities": list(self.intensities),
            "corruption_seed": self.corruption_seed,
            "n_bins": self.n_bins,
            "target_standardization": "train-split z-score",
        }
        if self.model == "gpc":
            snap["ess"] = asdict(self.ess)
        return to_jsonable(snap)


def _one_hot(labels, n_classes):
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def kernel_from_cell(cell: dict, family: str = "nngp",
                     base: KernelConfig | None = None):
    """Build (KernelConfig, noise_variance) from a flat grid cell."""
    base = base or KernelConfig(family=family)
    kwargs = {}
    for key in ("family", "activation", "depth", "weight_variance",
                "bias_variance", "kernel_scale", "diagonal_regularizer",
                "rbf_beta", "rbf_gamma"):
        if key in cell:
            kwargs[key] = cell[key]
    if "rbf_beta" in cell or "rbf_gamma" in cell:
        kwargs.setdefault("family", "rbf")
    readout = cell.get("readout", None)
    if readout == "unit":
        kwargs["readout_weight_variance"] = 1.0
        kwargs["readout_bias_variance"] = 0.0
    elif readout == "body":
        kwargs["readout_weight_variance"] = None
        kwargs["readout_bias_variance"] = None
    elif readout is not None:
        raise ValueError(f"unknown readout option {readout!r}")
    config = replace(base, **kwargs)
    noise = float(cell["noise_std"]) ** 2 if "noise_std" in cell else None
    return config, noise


def _fit_and_score(kernel, noise_variance, train, eval_set, heuristic=None,
                   cache=None):
    """Fit GPR on ``train`` and score ``eval_set``; returns a metric dict."""
    key = kernel
    if cache is not None and key in cache:
        k_train = cache[key]
    else:
        k_train = gram(train.features, None, kernel)
        if cache is not None:
            cache[key] = k_train
    if train.task == "classification":
        targets = _one_hot(train.targets, train.n_classes)
    else:
        targets = train.targets
    model = regression.fit(k_train, targets, noise_variance)
    k_cross = gram(eval_set.features, train.features, kernel)
    diag = kernel_diag(eval_set.features, kernel)
    posteriors = regression.predict(model, k_cross, diag)

    metrics = {}
    if train.task == "regression":
        mu = np.vstack([p.mean for p in posteriors])
        resid = unstandardize_targets(mu, train) - \
            unstandardize_targets(eval_set.targets, train)
        metrics["rmse"] = float(np.sqrt(np.mean(resid ** 2)))
        scale = (train.target_stats[1] if train.target_stats is not None
                 else np.ones(targets.shape[1]))
        scale = np.where(scale > 0, scale, 1.0)
        unposts = [regression.GaussianPosterior(
            mean=unstandardize_targets(p.mean, train),
            variance=p.variance * float(np.mean(scale ** 2)))
            for p in posteriors]
        metrics["gaussian_nll"] = regression.gaussian_nll(
            unposts, unstandardize_targets(eval_set.targets, train),
            noise_variance * float(np.mean(scale ** 2)))
        metrics["nll"] = metrics["gaussian_nll"]
    else:
        onehot = _one_hot(eval_set.targets, train.n_classes)
        metrics["gaussian_nll"] = regression.gaussian_nll(
            posteriors, onehot, noise_variance)
        preds = confidences_from_posteriors(posteriors, heuristic or
                                            HeuristicConfig())
        report = build_report(preds, eval_set.targets)
        metrics.update(report.to_dict())
        metrics.pop("reliability_bins")
        metrics["nll"] = metrics["nll_mean"]
        metrics["_report"] = report
        metrics["_posteriors"] = posteriors
    return metrics


def make_gpr_pipeline(heuristic: HeuristicConfig | None = None,
                      family: str = "nngp"):
    """Grid-search pipeline: cell -> validation metrics for GP regression."""
    cache: dict = {}

    def pipeline(cell, train, valid):
        kernel, noise = kernel_from_cell(cell, family=family)
        metrics = _fit_and_score(kernel, noise if noise is not None else 1e-2,
                                 train, valid, heuristic, cache)
        metrics.pop("_report", None)
        metrics.pop("_posteriors", None)
        return metrics

    return pipeline


def _evaluation_sets(spec, train_raw, test_raw):
    """Yield (label, kind, intensity, standardized test set)."""
    yield "clean", None, None, standardize(train_raw, test_raw)[1]
    for kind in spec.corruption_kinds:
        for intensity in spec.intensities:
            shifted = corrupt(test_raw, kind, intensity, spec.corruption_seed)
            yield (f"{kind}-{intensity}", kind, intensity,
                   standardize(train_raw, shifted)[1])


def run_experiment(spec: ExperimentSpec, out_dir=None):
    """Compose kernel -> inference -> heuristic -> metrics over the clean
    test set and every (corruption, intensity) pair.

    Returns (RunRecord, results dict); when ``out_dir`` is given the
    results JSON and the delimited metric/plot tables are written there.
    """
    started = time.perf_counter()
    train_raw, valid_raw, test_raw = split(spec.dataset, spec.split_seed,
                                           spec.ratios)
    train, valid, _ = standardize(train_raw, valid_raw, test_raw)
    heuristic = spec.heuristic

    if spec.model == "gpc":
        if spec.dataset.task != "classification":
            raise ValueError("gpc requires a classification dataset")
        k_train = gram(train.features, None, spec.kernel)
        prior_chol, _ = cholesky_with_jitter(k_train.entries)
        samples = classification.sample_posterior(
            k_train, train.targets, spec.ess, n_classes=train.n_classes)
    elif spec.model == "gpr":
        if spec.fit_heuristic_temperature:
            val_metrics = _fit_and_score(spec.kernel, spec.noise_variance,
                                         train, valid, heuristic)
            if "_posteriors" in val_metrics:
                t = fit_temperature(val_metrics["_posteriors"], valid.targets,
                                    kind=heuristic.kind, base_config=heuristic)
                heuristic = replace(heuristic, temperature=t)
    else:
        raise ValueError(f"unknown model {spec.model!r}")

    evaluations = []
    for label, kind, intensity, test_set in _evaluation_sets(spec, train_raw,
                                                             test_raw):
        if spec.model == "gpc":
            k_cross = gram(test_set.features, train.features, spec.kernel)
            diag = kernel_diag(test_set.features, spec.kernel)
            preds = classification.predict(samples, k_cross, diag, prior_chol)
            report = build_report(preds, test_set.targets, spec.n_bins)
            metrics = report.to_dict()
        else:
            metrics = _fit_and_score(spec.kernel, spec.noise_variance, train,
                                     test_set, heuristic)
            metrics.pop("_posteriors", None)
            report = metrics.pop("_report", None)
            if report is not None:
                metrics["reliability_bins"] = report.to_dict()["reliability_bins"]
            metrics.pop("nll", None)
        evaluations.append({"label": label, "corruption": kind,
                            "intensity": intensity, "metrics": metrics})

    quartiles = {}
    for metric in QUARTILE_METRICS:
        values = [ev["metrics"][metric] for ev in evaluations
                  if metric in ev["metrics"]]
        if values:
            q25, q50, q75 = quartile_summary(values)
            quartiles[metric] = {"q25": q25, "q50": q50, "q75": q75}

    results = to_jsonable({
        "format_version": FORMAT_VERSION,
        "config": spec.config_snapshot(),
        "heuristic_temperature": heuristic.temperature,
        "evaluations": evaluations,
        "quartiles": quartiles,
        "wall_clock": time.perf_counter() - started,
    })
    record = RunRecord(config=spec.config_snapshot(),
                       split_seed=spec.split_seed,
                       metrics={"n_evaluations": len(evaluations)},
                       wall_clock=results["wall_clock"])
    if out_dir is not None:
        record.artifact_paths = write_results(results, out_dir)
    return record, results


def _strip_private(metrics: dict) -> dict:
    return {k: v for k, v in metrics.items()
            if not k.startswith("_") and k != "reliability_bins"}


def write_results(results: dict, out_dir) -> list[str]:
    """Write results.json plus delimited metric and plot-data tables."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []

    json_path = out / "results.json"
    json_path.write_text(json.dumps(results, sort_keys=True, indent=2) + "\n")
    paths.append(str(json_path))

    metric_names = sorted({m for ev in results["evaluations"]
                           for m in _strip_private(ev["metrics"])})
    csv_path = out / "metrics.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "corruption", "intensity"] + metric_names)
        for ev in results["evaluations"]:
            metrics = _strip_private(ev["metrics"])
            writer.writerow([ev["label"], ev["corruption"] or "",
                             ev["intensity"] if ev["intensity"] else ""]
                            + [metrics.get(m, "") for m in metric_names])
    paths.append(str(csv_path))

    bins_path = out / "reliability_bins.csv"
    with open(bins_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "bin", "lower", "upper", "count",
                         "mean_confidence", "mean_accuracy"])
        for ev in results["evaluations"]:
            for i, b in enumerate(ev["metrics"].get("reliability_bins", [])):
                writer.writerow([ev["label"], i, b["lower"], b["upper"],
                                 b["count"], b["mean_confidence"],
                                 b["mean_accuracy"]])
    paths.append(str(bins_path))

    quart_path = out / "quartiles.csv"
    with open(quart_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "q25", "q50", "q75"])
        for metric, q in sorted(results["quartiles"].items()):
            writer.writerow([metric, q["q25"], q["q50"], q["q75"]])
    paths.append(str(quart_path))
    return paths
