"""Command-line interface.

Subcommands: kernel (dump a Gram matrix), gpr, gpc, tune, shift-eval,
report.  See README.md for examples.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import configio, report
from .data import CORRUPTION_KINDS, load_csv
from .experiment import ExperimentSpec, make_gpr_pipeline, run_experiment, \
    kernel_from_cell
from .gridsearch import grid_search, nngp_regression_grid, rbf_grid
from .kernels import gram
from .records import to_jsonable


def _add_common(parser):
    parser.add_argument("--data", required=True, help="dataset CSV path")
    parser.add_argument("--task", choices=["regression", "classification"],
                        default="regression")
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--heuristic",
                        choices=["exact", "pairwise", "softmax"])
    parser.add_argument("--temperature", default=None,
                        help="'fit' or a positive real")


def _load_config(args) -> dict:
    return configio.parse_config_file(args.config) if args.config else {}


def _heuristic(args, config):
    kind = args.heuristic
    temp = None
    fit_temp = False
    if args.temperature is not None:
        if args.temperature == "fit":
            fit_temp = True
        else:
            temp = float(args.temperature)
    heuristic = configio.heuristic_config_from(config, kind=kind,
                                               temperature=temp)
    return heuristic, fit_temp


def _spec(args, model: str, with_shift: bool) -> ExperimentSpec:
    config = _load_config(args)
    dataset = load_csv(args.data, task=args.task)
    heuristic, fit_temp = _heuristic(args, config)
    spec = ExperimentSpec(
        dataset=dataset,
        model=model,
        kernel=configio.kernel_config_from(config),
        noise_variance=config.get("noise_variance", 1e-2),
        ess=configio.ess_config_from(config),
        heuristic=heuristic,
        fit_heuristic_temperature=fit_temp,
        split_seed=args.seed,
        corruption_seed=args.seed + 1,
        name=Path(args.data).stem,
    )
    if with_shift:
        spec = replace(spec, corruption_kinds=tuple(CORRUPTION_KINDS),
                       intensities=(1, 2, 3, 4, 5))
    return spec


def cmd_kernel(args):
    config = _load_config(args)
    dataset = load_csv(args.data, task=args.task)
    kernel = configio.kernel_config_from(config)
    matrix = gram(dataset.features, None, kernel)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "gram.csv"
    np.savetxt(path, matrix.entries, delimiter=",")
    print(f"wrote {matrix.rows}x{matrix.cols} Gram matrix to {path}")


def cmd_gpr(args):
    _, results = run_experiment(_spec(args, "gpr", with_shift=False), args.out)
    _print_clean_metrics(results)


def cmd_gpc(args):
    _, results = run_experiment(_spec(args, "gpc", with_shift=False), args.out)
    _print_clean_metrics(results)


def cmd_shift_eval(args):
    model = "gpc" if args.model == "gpc" else "gpr"
    _, results = run_experiment(_spec(args, model, with_shift=True), args.out)
    print(f"{len(results['evaluations'])} evaluations written to {args.out}")


def cmd_tune(args):
    config = _load_config(args)
    dataset = load_csv(args.data, task=args.task)
    grid = configio.grid_from(config)
    if grid is None:
        preset = config.get("grid.preset", args.preset)
        grid = rbf_grid() if preset == "rbf" else nngp_regression_grid()
    from .data import split, standardize
    train_raw, valid_raw, _ = split(dataset, args.seed)
    train, valid = standardize(train_raw, valid_raw)[:2]
    family = "rbf" if any(a.startswith("rbf_") for a in grid.axes) else "nngp"
    heuristic, _ = _heuristic(args, config)
    best, records = grid_search(grid, train, valid,
                                make_gpr_pipeline(heuristic, family=family),
                                workers=args.workers, split_seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "tune.json").write_text(json.dumps(to_jsonable({
        "best_config": best,
        "metric": grid.metric,
        "records": [r.to_dict() for r in records],
    }), sort_keys=True, indent=2) + "\n")
    print(f"best config: {best}")


def cmd_report(args):
    results_path = args.results or str(Path(args.out) / "results.json")
    paths = report.render_report(results_path, args.out)
    for path in paths:
        print(path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="widegp",
        description="Infinite-width network kernels, GP inference, and "
                    "calibration evaluation under synthetic shift")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", help="dump a Gram matrix to CSV")
    _add_common(p)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("gpr", help="exact GP regression fit/predict/score")
    _add_common(p)
    p.set_defaults(func=cmd_gpr)

    p = sub.add_parser("gpc", help="slice-sampled softmax classification")
    _add_common(p)
    p.set_defaults(func=cmd_gpc)

    p = sub.add_parser("tune", help="validation grid search")
    _add_common(p)
    p.add_argument("--preset", choices=["nngp_r", "rbf"], default="nngp_r")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("shift-eval", help="corruption suite evaluation")
    _add_common(p)
    p.add_argument("--model", choices=["gpr", "gpc"], default="gpr")
    p.set_defaults(func=cmd_shift_eval)

    p = sub.add_parser("report", help="quartile tables, plot CSVs, figures")
    p.add_argument("--results", help="results.json path "
                   "(default: <out>/results.json)")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_report)
    return parser


def _print_clean_metrics(results):
    clean = results["evaluations"][0]["metrics"]
    shown = {k: v for k, v in clean.items() if k != "reliability_bins"}
    print(json.dumps(shown, sort_keys=True, indent=2))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
