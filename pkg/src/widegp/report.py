"""Render report tables and figures from a results JSON payload.

The delimited plot data (reliability bins, shift quartiles) is written
next to the figures so the numbers behind every panel stay inspectable.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["render_report"]

_SHIFT_METRICS = ("accuracy", "ece", "brier", "confidence_mean", "rmse")


def _load(results_path) -> dict:
    with open(results_path) as fh:
        return json.load(fh)


def _reliability_figure(results, out: Path) -> list[str]:
    paths = []
    for ev in results["evaluations"]:
        bins = ev["metrics"].get("reliability_bins")
        if not bins:
            continue
        conf = [b["mean_confidence"] for b in bins if b["count"]]
        acc = [b["mean_accuracy"] for b in bins if b["count"]]
        fig, ax = plt.subplots(figsize=(4, 4))
        ax.plot([0, 1], [0, 1], "k--", lw=1, label="ideal")
        ax.plot(conf, acc, "o-", color="C0", label=ev["label"])
        ax.set_xlabel("mean confidence")
        ax.set_ylabel("mean accuracy")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.legend(loc="upper left", fontsize=8)
        fig.tight_layout()
        path = out / f"reliability_{ev['label']}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(str(path))
    return paths


def _shift_figure(results, out: Path) -> list[str]:
    """Box plots of each metric across corruptions, one box per intensity."""
    evals = results["evaluations"]
    intensities = sorted({ev["intensity"] for ev in evals
                          if ev["intensity"] is not None})
    if not intensities:
        return []
    paths = []
    for metric in _SHIFT_METRICS:
        clean = [ev["metrics"][metric] for ev in evals
                 if ev["intensity"] is None and metric in ev["metrics"]]
        groups = [[ev["metrics"][metric] for ev in evals
                   if ev["intensity"] == i and metric in ev["metrics"]]
                  for i in intensities]
        if not any(groups):
            continue
        fig, ax = plt.subplots(figsize=(5, 3.5))
        data = ([clean] if clean else []) + groups
        labels = (["clean"] if clean else []) + [str(i) for i in intensities]
        ax.boxplot(data, tick_labels=labels)
        ax.set_xlabel("shift intensity")
        ax.set_ylabel(metric)
        fig.tight_layout()
        path = out / f"shift_{metric}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(str(path))
    return paths


def _shift_table(results, out: Path) -> str:
    path = out / "shift_metrics.csv"
    evals = results["evaluations"]
    metric_names = sorted({m for ev in evals for m in ev["metrics"]
                           if m != "reliability_bins"})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "corruption", "intensity"] + metric_names)
        for ev in evals:
            writer.writerow([ev["label"], ev["corruption"] or "",
                             ev["intensity"] or ""]
                            + [ev["metrics"].get(m, "") for m in metric_names])
    return str(path)


def _quartile_table(results, out: Path) -> str:
    path = out / "quartiles.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "q25", "q50", "q75"])
        for metric, q in sorted(results.get("quartiles", {}).items()):
            writer.writerow([metric, q["q25"], q["q50"], q["q75"]])
    return str(path)


def render_report(results_path, out_dir) -> list[str]:
    """Write quartile/metric CSVs and the matplotlib figures; returns the
    produced file paths."""
    results = _load(results_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [_shift_table(results, out), _quartile_table(results, out)]
    paths += _reliability_figure(results, out)
    paths += _shift_figure(results, out)
    return paths
