"""Random forest of weighted-Gini decision trees (the alternative classifier).

Trees grow unbounded with a sqrt(d) feature subsample per split, bootstrap
resampling, and balanced class weights applied both to impurity and to leaf
votes. Everything is seed-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import DimensionMismatch, InvariantViolation
from ..frames import LABEL_ORDER, ActionLabel
from ..serialization import load_container, save_container
from ..windows import balanced_class_weights

_LEAF = -1


@dataclass
class DecisionTree:
    """Array-encoded binary tree: node k splits on feature[k] at threshold[k];
    feature[k] == -1 marks a leaf whose weighted class masses sit in hist[k]."""

    feature: np.ndarray    # (nodes,) int
    threshold: np.ndarray  # (nodes,) float
    left: np.ndarray       # (nodes,) int
    right: np.ndarray      # (nodes,) int
    hist: np.ndarray       # (nodes, n_classes) float, weighted class mass

    def leaf_hist(self, x: np.ndarray) -> np.ndarray:
        node = 0
        while self.feature[node] != _LEAF:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return self.hist[node]


def _weighted_gini(mass: np.ndarray) -> float:
    total = mass.sum()
    if total <= 0:
        return 0.0
    p = mass / total
    return float(1.0 - np.dot(p, p))


class _TreeBuilder:
    def __init__(self, X: np.ndarray, y_idx: np.ndarray, weights: np.ndarray,
                 n_classes: int, max_features: int, rng: np.random.Generator,
                 min_samples_leaf: int = 1):
        self.X = X
        self.y_idx = y_idx
        self.weights = weights
        self.n_classes = n_classes
        self.max_features = max_features
        self.rng = rng
        self.min_samples_leaf = min_samples_leaf
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.hist: list[np.ndarray] = []

    def _new_node(self) -> int:
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.hist.append(np.zeros(self.n_classes))
        return len(self.feature) - 1

    def _node_mass(self, idx: np.ndarray) -> np.ndarray:
        return np.bincount(self.y_idx[idx], weights=self.weights[idx],
                           minlength=self.n_classes)

    def _best_split_on(self, idx: np.ndarray, f: int,
                       ) -> tuple[float, float] | None:
        """Best (cost, threshold) for one feature, or None if constant."""
        values = self.X[idx, f]
        order = np.argsort(values, kind="stable")
        values = values[order]
        if values[0] == values[-1]:
            return None
        w = self.weights[idx][order]
        labels = self.y_idx[idx][order]
        onehot = np.zeros((len(idx), self.n_classes))
        onehot[np.arange(len(idx)), labels] = w
        prefix = np.cumsum(onehot, axis=0)
        total = prefix[-1]
        total_w = total.sum()
        # candidate cut after position k (between distinct values)
        cuts = np.flatnonzero(values[:-1] < values[1:])
        cuts = cuts[(cuts + 1 >= self.min_samples_leaf)
                    & (len(idx) - cuts - 1 >= self.min_samples_leaf)]
        if cuts.size == 0:
            return None
        left_mass = prefix[cuts]
        right_mass = total[None, :] - left_mass
        wl = left_mass.sum(axis=1)
        wr = right_mass.sum(axis=1)
        gini_l = 1.0 - np.einsum("ij,ij->i", left_mass, left_mass) / (wl * wl)
        gini_r = 1.0 - np.einsum("ij,ij->i", right_mass, right_mass) / (wr * wr)
        cost = (wl * gini_l + wr * gini_r) / total_w
        k = int(cost.argmin())
        thr = (values[cuts[k]] + values[cuts[k] + 1]) / 2.0
        return float(cost[k]), thr

    def build(self, idx: np.ndarray) -> int:
        node = self._new_node()
        mass = self._node_mass(idx)
        self.hist[node] = mass
        node_gini = _weighted_gini(mass)
        if node_gini <= 0.0 or len(idx) < 2 * self.min_samples_leaf:
            return node
        n_features = self.X.shape[1]
        drawn = self.rng.permutation(n_features)
        best: tuple[float, float, int] | None = None
        examined = 0
        for f in drawn:
            result = self._best_split_on(idx, int(f))
            if result is not None:
                examined += 1
                cost, thr = result
                if best is None or cost < best[0] - 1e-15:
                    best = (cost, thr, int(f))
            # look at max_features usable candidates, like the usual
            # sqrt-feature rule; keep scanning only while none split
            if examined >= self.max_features and best is not None:
                break
        if best is None or best[0] >= node_gini - 1e-12:
            return node
        _, thr, f = best
        go_left = self.X[idx, f] <= thr
        left_idx = idx[go_left]
        right_idx = idx[~go_left]
        if len(left_idx) == 0 or len(right_idx) == 0:
            return node
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self.build(left_idx)
        self.right[node] = self.build(right_idx)
        return node

    def to_tree(self) -> DecisionTree:
        return DecisionTree(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            hist=np.stack(self.hist),
        )


@dataclass
class ForestModel:
    label_order: tuple[ActionLabel, ...]
    trees: list[DecisionTree]
    class_weights: dict[ActionLabel, float]
    feature_dim: int
    hyperparameters: dict = field(default_factory=dict)

    def predict_many(self, X: np.ndarray) -> list[ActionLabel]:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.feature_dim:
            raise DimensionMismatch(
                f"feature dim {X.shape[1]} != model dim {self.feature_dim}")
        out = []
        for x in X:
            votes = np.zeros(len(self.label_order))
            for tree in self.trees:
                hist = tree.leaf_hist(x)
                votes[int(hist.argmax())] += 1.0
            out.append(self.label_order[int(votes.argmax())])
        return out

    def predict(self, x: np.ndarray) -> ActionLabel:
        return self.predict_many(np.atleast_2d(x))[0]


def _resolve_max_features(specifier: str | int | None, d: int) -> int:
    if specifier is None:
        return d
    if specifier == "sqrt":
        return max(1, int(np.sqrt(d)))
    if specifier == "log2":
        return max(1, int(np.log2(d)))
    value = int(specifier)
    if not 1 <= value <= d:
        raise ValueError(f"max_features must lie in [1, {d}], got {value}")
    return value


def train_forest(X: np.ndarray, y: Sequence[ActionLabel | str],
                 n_estimators: int = 100,
                 max_features: str | int | None = "sqrt",
                 bootstrap: bool = True,
                 class_weight: str | Mapping[ActionLabel, float] | None = "balanced",
                 min_samples_leaf: int = 1, seed: int = 0) -> ForestModel:
    """Grow the forest. Each tree gets an independent derived seed for its
    bootstrap sample and feature draws, so results are reproducible and
    independent of any training parallelism."""
    X = np.asarray(X, dtype=np.float64)
    labels = [lab if isinstance(lab, ActionLabel) else ActionLabel(lab)
              for lab in y]
    present = [label for label in LABEL_ORDER if label in set(labels)]
    if len(present) < 2:
        raise InvariantViolation("need at least 2 distinct labels to train")
    counts = {label: labels.count(label) for label in present}
    if class_weight == "balanced":
        weights_by_label = balanced_class_weights(counts)
    elif class_weight is None:
        weights_by_label = {label: 1.0 for label in present}
    else:
        weights_by_label = {label: float(class_weight.get(label, 1.0))
                            for label in present}
    label_to_idx = {label: k for k, label in enumerate(present)}
    y_idx = np.array([label_to_idx[label] for label in labels], dtype=np.int64)
    base_weights = np.array([weights_by_label[label] for label in labels])
    n = X.shape[0]
    mf = _resolve_max_features(max_features, X.shape[1])
    trees = []
    seeds = np.random.SeedSequence(seed).spawn(n_estimators)
    for tree_seed in seeds:
        rng = np.random.default_rng(tree_seed)
        if bootstrap:
            sample = rng.integers(0, n, size=n)
            multiplicity = np.bincount(sample, minlength=n).astype(np.float64)
            weights = base_weights * multiplicity
            idx = np.flatnonzero(multiplicity)
        else:
            weights = base_weights
            idx = np.arange(n)
        builder = _TreeBuilder(X, y_idx, weights, len(present), mf, rng,
                               min_samples_leaf)
        builder.build(idx)
        trees.append(builder.to_tree())
    return ForestModel(
        label_order=tuple(present),
        trees=trees,
        class_weights=weights_by_label,
        feature_dim=X.shape[1],
        hyperparameters={"n_estimators": n_estimators,
                         "max_features": max_features,
                         "bootstrap": bootstrap,
                         "class_weight": "balanced" if class_weight == "balanced"
                         else None if class_weight is None
                         else {k.value: v for k, v in weights_by_label.items()},
                         "min_samples_leaf": min_samples_leaf,
                         "seed": seed},
    )


def predict_forest(model: ForestModel, x: np.ndarray) -> ActionLabel:
    return model.predict(x)


def save_forest(model: ForestModel, path) -> None:
    tensors: dict[str, np.ndarray] = {}
    for k, tree in enumerate(model.trees):
        tensors[f"feat{k}"] = tree.feature
        tensors[f"thr{k}"] = tree.threshold
        tensors[f"left{k}"] = tree.left
        tensors[f"right{k}"] = tree.right
        tensors[f"hist{k}"] = tree.hist
    hp = dict(model.hyperparameters)
    hp.update({
        "feature_dim": model.feature_dim,
        "label_order": [label.value for label in model.label_order],
        "class_weights": {label.value: w
                          for label, w in model.class_weights.items()},
        "n_trees": len(model.trees),
    })
    save_container(path, "forest", hp, tensors)


def load_forest(path) -> ForestModel:
    meta, tensors = load_container(path, expect_kind="forest")
    hp = meta["hyperparameters"]
    trees = []
    for k in range(int(hp["n_trees"])):
        trees.append(DecisionTree(
            feature=tensors[f"feat{k}"].astype(np.int64),
            threshold=tensors[f"thr{k}"].astype(np.float64),
            left=tensors[f"left{k}"].astype(np.int64),
            right=tensors[f"right{k}"].astype(np.int64),
            hist=tensors[f"hist{k}"].astype(np.float64),
        ))
    return ForestModel(
        label_order=tuple(ActionLabel(v) for v in hp["label_order"]),
        trees=trees,
        class_weights={ActionLabel(k): float(v)
                       for k, v in hp["class_weights"].items()},
        feature_dim=int(hp["feature_dim"]),
        hyperparameters={k: hp[k] for k in
                         ("n_estimators", "max_features", "bootstrap",
                          "class_weight", "min_samples_leaf", "seed")},
    )
