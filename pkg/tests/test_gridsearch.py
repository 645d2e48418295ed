from __future__ import annotations

import numpy as np
import pytest

from greetcue.classifier.grid import (DEFAULT_GRID, grid_search,
                                      stratified_kfold)
from greetcue.errors import InvariantViolation
from greetcue.frames import ActionLabel

W, S, L = ActionLabel.WAIT, ActionLabel.SPEAK, ActionLabel.LISTEN


def smooth_two_class(n_per_class: int = 30, seed: int = 0):
    rng = np.random.default_rng(seed)
    X = np.concatenate([rng.normal(0.0, 0.4, size=(n_per_class, 2)),
                        rng.normal(1.6, 0.4, size=(n_per_class, 2))])
    y = [W] * n_per_class + [S] * n_per_class
    return X, y


class TestStratifiedKFold:
    def test_partition_and_stratification(self):
        y = [W] * 20 + [S] * 10 + [L] * 10
        folds = stratified_kfold(y, folds=5, seed=0)
        all_idx = np.concatenate(folds)
        assert sorted(all_idx) == list(range(40))
        for fold in folds:
            labels = [y[i] for i in fold]
            assert labels.count(W) == 4
            assert labels.count(S) == 2
            assert labels.count(L) == 2

    def test_rare_class_rejected(self):
        y = [W] * 20 + [S] * 3
        with pytest.raises(InvariantViolation, match="fewer than"):
            stratified_kfold(y, folds=5, seed=0)

    def test_deterministic(self):
        y = [(W, S)[k % 2] for k in range(30)]
        a = stratified_kfold(y, folds=3, seed=4)
        b = stratified_kfold(y, folds=3, seed=4)
        for fa, fb in zip(a, b):
            assert np.array_equal(fa, fb)


class TestGridSearch:
    def test_single_candidate_is_best(self):
        X, y = smooth_two_class()
        grid = [{"model": "svm", "C": 1.0, "gamma": "scale"}]
        report = grid_search(X, y, grid=grid, folds=5, seed=0)
        assert report.best_index == 0
        assert report.best_params == grid[0]
        assert report.best_model is not None

    def test_degenerate_gamma_loses(self):
        # gamma 1e9 memorizes support points and generalizes to nothing
        X, y = smooth_two_class(seed=1)
        grid = [{"model": "svm", "C": 1.0, "gamma": 1e9},
                {"model": "svm", "C": 1.0, "gamma": "scale"}]
        report = grid_search(X, y, grid=grid, folds=5, seed=1)
        assert report.best_params["gamma"] == "scale"
        assert report.means[1] > report.means[0]

    def test_repeat_identical_report(self):
        X, y = smooth_two_class(seed=2)
        grid = [{"model": "svm", "C": 1.0, "gamma": "scale"},
                {"model": "forest", "n_estimators": 5}]
        a = grid_search(X, y, grid=grid, folds=4, seed=7)
        b = grid_search(X, y, grid=grid, folds=4, seed=7)
        assert a.fold_scores == b.fold_scores
        assert a.best_index == b.best_index
        assert a.to_table() == b.to_table()

    def test_tie_breaks_to_earliest_candidate(self):
        X, y = smooth_two_class(seed=3)
        grid = [{"model": "svm", "C": 1.0, "gamma": "scale"},
                {"model": "svm", "C": 1.0, "gamma": "scale"}]
        report = grid_search(X, y, grid=grid, folds=4, seed=3)
        assert report.means[0] == report.means[1]
        assert report.best_index == 0

    def test_table_shape(self):
        X, y = smooth_two_class(seed=4)
        grid = [{"model": "svm", "C": 1.0, "gamma": "scale"}]
        report = grid_search(X, y, grid=grid, folds=3, seed=0)
        lines = report.to_table().splitlines()
        assert lines[0].split("\t") == ["candidate", "fold0", "fold1",
                                        "fold2", "mean", "std"]
        assert len(lines) == 2

    def test_default_grid_contents(self):
        assert len(DEFAULT_GRID) == 18
        assert {g["C"] for g in DEFAULT_GRID} == {0.1, 1.0, 10.0}
