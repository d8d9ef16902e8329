"""Grid search: preset shapes, tie-breaking, failure capture, and
recovery of a known generating configuration."""

import numpy as np
import pytest

from widegp.data import Dataset
from widegp.experiment import kernel_from_cell, make_gpr_pipeline
from widegp.gridsearch import (GridSpec, grid_search, nngp_regression_grid,
                               rbf_grid)
from widegp.kernels import KernelConfig, gram


class TestGridSpec:
    def test_nngp_preset_cell_count(self):
        assert nngp_regression_grid().n_cells == 2160

    def test_rbf_preset_axes(self):
        grid = rbf_grid()
        assert len(grid.axes["rbf_gamma"]) == 9
        assert len(grid.axes["rbf_beta"]) == 7

    def test_cells_iterate_lexicographically(self):
        grid = GridSpec(axes={"a": [1, 2], "b": ["x", "y"]})
        cells = list(grid.cells())
        assert cells == [{"a": 1, "b": "x"}, {"a": 1, "b": "y"},
                         {"a": 2, "b": "x"}, {"a": 2, "b": "y"}]
        assert grid.n_cells == 4

    def test_rejects_empty_axes(self):
        with pytest.raises(ValueError):
            GridSpec(axes={})
        with pytest.raises(ValueError):
            GridSpec(axes={"a": []})

    def test_rejects_unknown_metric(self):
        with pytest.raises(ValueError):
            GridSpec(axes={"a": [1]}, metric="f1")


def _toy_sets(rng, n_train=20, n_valid=8):
    X = rng.standard_normal((n_train + n_valid, 2))
    y = np.sin(X[:, 0]) + 0.05 * rng.standard_normal(n_train + n_valid)
    ds = Dataset(features=X, targets=y, task="regression")
    return ds.subset(np.arange(n_train)), \
        ds.subset(np.arange(n_train, n_train + n_valid))


class TestGridSearch:
    def test_single_cell_selected(self, rng):
        train, valid = _toy_sets(rng)
        grid = GridSpec(axes={"noise_std": [0.1]})
        best, records = grid_search(grid, train, valid,
                                    make_gpr_pipeline(family="rbf"))
        assert best == {"noise_std": 0.1}
        assert len(records) == 1 and records[0].error is None

    def test_strict_improvement_tie_break(self):
        """Equal metric values keep the earlier (lexicographic) cell."""
        grid = GridSpec(axes={"a": [1, 2, 3]})
        best, _ = grid_search(grid, None, None,
                              lambda cell, tr, va: {"nll": 1.0})
        assert best == {"a": 1}

    def test_accuracy_is_maximized(self):
        grid = GridSpec(axes={"a": [1, 2, 3]}, metric="accuracy")
        best, _ = grid_search(grid, None, None,
                              lambda cell, tr, va: {"accuracy": cell["a"]})
        assert best == {"a": 3}

    def test_cell_failures_recorded_not_fatal(self):
        def pipeline(cell, tr, va):
            if cell["a"] == 1:
                raise RuntimeError("boom")
            return {"nll": float(cell["a"])}

        grid = GridSpec(axes={"a": [1, 2, 3]})
        best, records = grid_search(grid, None, None, pipeline)
        assert best == {"a": 2}
        assert records[0].error is not None and "boom" in records[0].error
        assert records[1].error is None

    def test_all_cells_failing_raises(self):
        def pipeline(cell, tr, va):
            raise RuntimeError("boom")

        with pytest.raises(RuntimeError, match="every grid cell failed"):
            grid_search(GridSpec(axes={"a": [1, 2]}), None, None, pipeline)

    def test_workers_agree_with_serial(self, rng):
        train, valid = _toy_sets(rng)
        grid = GridSpec(axes={"rbf_gamma": [0.1, 1.0],
                              "noise_std": [0.01, 0.1]})
        pipeline = make_gpr_pipeline(family="rbf")
        best_serial, rec_serial = grid_search(grid, train, valid, pipeline)
        best_par, rec_par = grid_search(grid, train, valid, pipeline,
                                        workers=4)
        assert best_serial == best_par
        for a, b in zip(rec_serial, rec_par):
            assert a.config == b.config
            assert a.metrics["nll"] == pytest.approx(b.metrics["nll"])

    def test_never_sees_the_test_split(self, rng):
        """The search is handed only train and valid objects."""
        train, valid = _toy_sets(rng)
        seen = []

        def pipeline(cell, tr, va):
            seen.append((id(tr), id(va)))
            return {"nll": 0.0}

        grid_search(GridSpec(axes={"a": [1, 2]}), train, valid, pipeline)
        assert set(seen) == {(id(train), id(valid))}

    def test_recovers_generating_configuration(self, rng):
        """Data drawn from a known NNGP prior: the search picks the
        generating cell or one with no worse validation NLL."""
        oracle = KernelConfig(activation="relu", depth=1,
                              weight_variance=2.0, bias_variance=0.1)
        X = rng.standard_normal((60, 3))
        K = gram(X, None, oracle).entries
        L = np.linalg.cholesky(K + 1e-8 * np.eye(60))
        noise_std = 0.1
        y = L @ rng.standard_normal(60) + noise_std * rng.standard_normal(60)
        ds = Dataset(features=X, targets=y, task="regression")
        train, valid = ds.subset(np.arange(45)), ds.subset(np.arange(45, 60))

        grid = GridSpec(axes={
            "activation": ["relu", "erf"],
            "depth": [1, 4],
            "weight_variance": [0.5, 2.0],
            "bias_variance": [0.1],
            "noise_std": [1e-3, 0.1, 1.0],
        })
        pipeline = make_gpr_pipeline(family="nngp")
        best, records = grid_search(grid, train, valid, pipeline)
        oracle_cell = {"activation": "relu", "depth": 1,
                       "weight_variance": 2.0, "bias_variance": 0.1,
                       "noise_std": 0.1}
        by_config = {tuple(sorted(r.config.items())): r.metrics["nll"]
                     for r in records if r.error is None}
        best_nll = by_config[tuple(sorted(best.items()))]
        oracle_nll = by_config[tuple(sorted(oracle_cell.items()))]
        assert best_nll <= oracle_nll + 1e-9


class TestKernelFromCell:
    def test_readout_unit_mapping(self):
        config, noise = kernel_from_cell({"activation": "erf", "depth": 4,
                                          "readout": "unit",
                                          "noise_std": 0.5})
        assert config.readout_w == 1.0
        assert config.readout_b == 0.0
        assert noise == pytest.approx(0.25)

    def test_readout_body_mapping(self):
        config, noise = kernel_from_cell({"weight_variance": 2.0,
                                          "readout": "body"})
        assert config.readout_w == 2.0
        assert noise is None

    def test_rbf_cell_switches_family(self):
        config, _ = kernel_from_cell({"rbf_gamma": 0.5, "rbf_beta": 1.0,
                                      "noise_std": 0.1})
        assert config.family == "rbf"

    def test_unknown_readout_rejected(self):
        with pytest.raises(ValueError):
            kernel_from_cell({"readout": "wide"})
