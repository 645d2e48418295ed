"""Stratified k-fold grid search over classifier hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import InvariantViolation
from ..frames import ActionLabel
from . import forest as forest_mod
from . import svm as svm_mod

#: Shipped default grid: one-vs-one RBF machines around the production
#: operating point, both class-weight modes.
DEFAULT_GRID: tuple[dict, ...] = tuple(
    {"model": "svm", "C": c, "gamma": g, "class_weight": w}
    for c in (0.1, 1.0, 10.0)
    for g in ("scale", 0.01, 0.001)
    for w in ("balanced", None)
)


def stratified_kfold(y: Sequence[ActionLabel], folds: int, seed: int,
                     ) -> list[np.ndarray]:
    """Deterministic stratified fold assignment: per class, shuffle then deal
    round-robin. Returns the test-index array of each fold."""
    if folds < 2:
        raise ValueError("folds must be >= 2")
    y = list(y)
    rng = np.random.default_rng(seed)
    assignment = np.zeros(len(y), dtype=np.int64)
    classes = sorted({label.value for label in y})
    for cls in classes:
        idx = np.array([k for k, label in enumerate(y) if label.value == cls])
        if len(idx) < folds:
            raise InvariantViolation(
                f"class {cls!r} has {len(idx)} members, fewer than "
                f"{folds} folds")
        idx = idx[rng.permutation(len(idx))]
        for pos, sample in enumerate(idx):
            assignment[sample] = pos % folds
    return [np.flatnonzero(assignment == f) for f in range(folds)]


def _fit_candidate(params: Mapping, X: np.ndarray, y: list[ActionLabel],
                   seed: int):
    kind = params.get("model", "svm")
    opts = {k: v for k, v in params.items() if k != "model"}
    if kind == "svm":
        return svm_mod.train_svm(X, y, **opts)
    if kind == "forest":
        opts.setdefault("seed", seed)
        return forest_mod.train_forest(X, y, **opts)
    raise ValueError(f"unknown model kind {kind!r}")


@dataclass
class GridSearchReport:
    grid: tuple[dict, ...]
    fold_scores: list[list[float]]   # per candidate, per fold accuracy
    means: list[float]
    stds: list[float]
    best_index: int
    best_params: dict
    best_model: object = field(repr=False, default=None)

    def to_table(self, sep: str = "\t") -> str:
        """Delimited table: candidate, per-fold scores, mean, std."""
        n_folds = len(self.fold_scores[0]) if self.fold_scores else 0
        header = ["candidate"] + [f"fold{k}" for k in range(n_folds)] \
            + ["mean", "std"]
        lines = [sep.join(header)]
        for k, params in enumerate(self.grid):
            desc = ",".join(f"{key}={params[key]}" for key in sorted(params))
            cells = [desc] + [f"{s:.6f}" for s in self.fold_scores[k]] \
                + [f"{self.means[k]:.6f}", f"{self.stds[k]:.6f}"]
            lines.append(sep.join(cells))
        return "\n".join(lines)


def grid_search(X: np.ndarray, y: Sequence[ActionLabel | str],
                grid: Sequence[Mapping] | None = None, folds: int = 10,
                seed: int = 0) -> GridSearchReport:
    """Score every candidate by mean stratified-CV accuracy and refit the
    best one on all data. Ties break toward the earliest candidate in grid
    order. Fully deterministic for a fixed seed: folds and every per-fold
    fit seed derive from it, so results do not depend on evaluation order."""
    X = np.asarray(X, dtype=np.float64)
    labels = [lab if isinstance(lab, ActionLabel) else ActionLabel(lab)
              for lab in y]
    grid = tuple(dict(g) for g in (grid if grid is not None else DEFAULT_GRID))
    if not grid:
        raise ValueError("empty parameter grid")
    fold_idx = stratified_kfold(labels, folds, seed)
    all_scores: list[list[float]] = []
    for cand_no, params in enumerate(grid):
        scores = []
        for fold_no, test_idx in enumerate(fold_idx):
            test_mask = np.zeros(len(labels), dtype=bool)
            test_mask[test_idx] = True
            train_idx = np.flatnonzero(~test_mask)
            y_train = [labels[i] for i in train_idx]
            fit_seed = seed * 1_000_003 + cand_no * 1009 + fold_no
            model = _fit_candidate(params, X[train_idx], y_train, fit_seed)
            pred = model.predict_many(X[test_idx])
            truth = [labels[i] for i in test_idx]
            scores.append(float(np.mean([p == t for p, t in
                                         zip(pred, truth)])))
        all_scores.append(scores)
    means = [float(np.mean(s)) for s in all_scores]
    stds = [float(np.std(s)) for s in all_scores]
    best_index = int(np.argmax(means))  # argmax keeps the earliest tie
    best_model = _fit_candidate(grid[best_index], X, labels,
                                seed * 1_000_003 - 1)
    return GridSearchReport(
        grid=grid,
        fold_scores=all_scores,
        means=means,
        stds=stds,
        best_index=best_index,
        best_params=dict(grid[best_index]),
        best_model=best_model,
    )
