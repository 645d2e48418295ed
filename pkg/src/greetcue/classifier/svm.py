"""RBF-kernel support vector machine trained with sequential minimal
optimization, one-vs-one over the three action classes.

The binary solver keeps the dual gradient up to date and repeatedly optimizes
the maximal KKT-violating pair, so the final iterate satisfies the KKT
conditions within the requested tolerance for every training point. Class
imbalance is handled by scaling each point's box constraint with its class
weight.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import ConvergenceError, DimensionMismatch, InvariantViolation
from ..frames import LABEL_ORDER, ActionLabel
from ..serialization import load_container, save_container
from ..windows import balanced_class_weights


def resolve_gamma_scale(X: np.ndarray) -> float:
    """gamma = 1 / (d * Var(X)) with the population variance over all entries."""
    X = np.asarray(X, dtype=np.float64)
    if X.size == 0:
        raise InvariantViolation("cannot resolve gamma on an empty matrix")
    var = float(X.var())
    # rounding noise on a constant matrix still counts as degenerate
    floor = np.finfo(np.float64).eps * max(1.0, float(np.abs(X).max()) ** 2)
    if var <= floor:
        raise InvariantViolation("zero feature variance: data is constant, "
                                 "gamma 'scale' is undefined")
    return 1.0 / (X.shape[1] * var)


class _KernelRows:
    """RBF kernel rows with an LRU cache capped by memory budget.

    Results are independent of the cache policy: rows are pure functions of
    (X, gamma); the cache only avoids recomputation.
    """

    def __init__(self, X: np.ndarray, gamma: float, cache_mb: float = 256.0):
        self.X = X
        self.gamma = gamma
        self.sq = np.einsum("ij,ij->i", X, X)
        row_bytes = max(X.shape[0] * 8, 1)
        self.max_rows = int(cache_mb * 1e6 // row_bytes)
        self._cache: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        cached = self._cache.get(i)
        if cached is not None:
            self._cache.move_to_end(i)
            return cached
        d2 = self.sq + self.sq[i] - 2.0 * (self.X @ self.X[i])
        np.maximum(d2, 0.0, out=d2)
        k = np.exp(-self.gamma * d2)
        if self.max_rows > 0:
            self._cache[i] = k
            while len(self._cache) > self.max_rows:
                self._cache.popitem(last=False)
        return k

    def diag(self) -> np.ndarray:
        return np.ones(self.X.shape[0])


def rbf_kernel_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    d2 = (np.einsum("ij,ij->i", A, A)[:, None]
          + np.einsum("ij,ij->i", B, B)[None, :]
          - 2.0 * (A @ B.T))
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


def smo_solve(X: np.ndarray, y: np.ndarray, C: np.ndarray, gamma: float,
              tol: float = 1e-3, max_iter: int | None = None,
              cache_mb: float = 256.0) -> tuple[np.ndarray, float, int]:
    """Solve the dual SVM problem min 1/2 a'Qa - sum(a) s.t. y'a = 0,
    0 <= a_i <= C_i, with Q_ij = y_i y_j K(x_i, x_j).

    Returns (alpha, bias, iterations). Selection picks the maximal violating
    pair; the loop stops when the duality violation m - M drops to tol, which
    bounds every point's KKT residual by tol/2 around the returned bias.
    """
    n = X.shape[0]
    y = np.asarray(y, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if max_iter is None:
        max_iter = max(200_000, 50 * n)
    kernel = _KernelRows(X, gamma, cache_mb)
    alpha = np.zeros(n)
    grad = np.full(n, -1.0)  # Q alpha - 1 at alpha = 0
    eps_bound = 1e-12
    it = 0
    while True:
        # -y*grad is the per-point violation score
        score = -y * grad
        up = ((y > 0) & (alpha < C - eps_bound)) | ((y < 0) & (alpha > eps_bound))
        low = ((y > 0) & (alpha > eps_bound)) | ((y < 0) & (alpha < C - eps_bound))
        if not up.any() or not low.any():
            break
        i = int(np.where(up, score, -np.inf).argmax())
        j = int(np.where(low, score, np.inf).argmin())
        m, M = score[i], score[j]
        if m - M <= tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"SMO did not reach tolerance {tol} within {max_iter} "
                f"iterations (violation {m - M:.3g}); increase max_iter or tol")
        Ki = kernel.row(i)
        Kj = kernel.row(j)
        eta = Ki[i] + Kj[j] - 2.0 * Ki[j]
        if eta <= 1e-12:
            eta = 1e-12
        # two-variable subproblem on (alpha_i, alpha_j)
        ai_old, aj_old = alpha[i], alpha[j]
        Ei = y[i] * grad[i]  # f'(x_i) - y_i without bias
        Ej = y[j] * grad[j]
        if y[i] != y[j]:
            L = max(0.0, aj_old - ai_old)
            H = min(C[j], C[i] + aj_old - ai_old)
        else:
            L = max(0.0, ai_old + aj_old - C[i])
            H = min(C[j], ai_old + aj_old)
        aj = aj_old + y[j] * (Ei - Ej) / eta
        aj = min(max(aj, L), H)
        ai = ai_old + y[i] * y[j] * (aj_old - aj)
        if abs(aj - aj_old) < 1e-14:
            # bounds pinch the step below float resolution; no progress possible
            break
        alpha[i], alpha[j] = ai, aj
        di = (ai - ai_old) * y[i]
        dj = (aj - aj_old) * y[j]
        grad += y * (di * Ki + dj * Kj)
        it += 1
    score = -y * grad
    free = (alpha > eps_bound) & (alpha < C - eps_bound)
    if free.any():
        bias = float(score[free].mean())
    else:
        up = ((y > 0) & (alpha < C - eps_bound)) | ((y < 0) & (alpha > eps_bound))
        low = ((y > 0) & (alpha > eps_bound)) | ((y < 0) & (alpha < C - eps_bound))
        hi = score[up].max() if up.any() else 0.0
        lo = score[low].min() if low.any() else 0.0
        bias = float((hi + lo) / 2.0)
    return alpha, bias, it


def dual_objective(alpha: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    """1/2 a'Qa - sum(a) for Q = (y y') * K."""
    q = (alpha * y) @ K @ (alpha * y)
    return float(0.5 * q - alpha.sum())


@dataclass
class PairMachine:
    """One binary machine of the one-vs-one ensemble.

    ``positive`` is the label voted for when the decision value is > 0 (or
    exactly 0: ties break toward the earlier label in the canonical order).
    """

    positive: ActionLabel
    negative: ActionLabel
    support_vectors: np.ndarray   # (m, d)
    dual_coef: np.ndarray         # (m,) alpha_k * y_k
    bias: float
    support_idx: np.ndarray       # indices into the pair's training subset
    objective: float
    iterations: int

    def decision(self, X: np.ndarray, gamma: float) -> np.ndarray:
        K = rbf_kernel_matrix(np.atleast_2d(X), self.support_vectors, gamma)
        return K @ self.dual_coef + self.bias


@dataclass
class SvmModel:
    """One-vs-one RBF SVM over the action classes."""

    label_order: tuple[ActionLabel, ...]
    pairs: list[PairMachine]
    gamma: float
    C: float
    class_weights: dict[ActionLabel, float]
    feature_dim: int
    tol: float
    hyperparameters: dict = field(default_factory=dict)

    def decision_values(self, X: np.ndarray) -> dict[tuple[ActionLabel, ActionLabel], np.ndarray]:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.feature_dim:
            raise DimensionMismatch(
                f"feature dim {X.shape[1]} != model dim {self.feature_dim}")
        return {(p.positive, p.negative): p.decision(X, self.gamma)
                for p in self.pairs}

    def predict_many(self, X: np.ndarray) -> list[ActionLabel]:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        decisions = self.decision_values(X)
        out = []
        for row in range(X.shape[0]):
            label, _, _ = _vote({pair: vals[row] for pair, vals in
                                 decisions.items()}, self.label_order)
            out.append(label)
        return out

    def predict(self, x: np.ndarray) -> ActionLabel:
        return self.predict_many(np.atleast_2d(x))[0]


def _vote(decisions: Mapping[tuple[ActionLabel, ActionLabel], float],
          label_order: Sequence[ActionLabel],
          ) -> tuple[ActionLabel, dict[ActionLabel, int], dict[ActionLabel, float]]:
    votes = {label: 0 for label in label_order}
    margin_for = {label: 0.0 for label in label_order}
    for (pos, neg), value in decisions.items():
        winner = pos if value >= 0.0 else neg
        votes[winner] += 1
        margin_for[winner] += abs(float(value))
    best_count = max(votes.values())
    tied = [label for label in label_order if votes[label] == best_count]
    if len(tied) > 1:
        # largest summed absolute margin over won pairs, then label order
        best_margin = max(margin_for[label] for label in tied)
        tied = [label for label in tied
                if margin_for[label] >= best_margin - 1e-12]
    return tied[0], votes, margin_for


def train_svm(X: np.ndarray, y: Sequence[ActionLabel | str], C: float = 1.0,
              gamma: float | str = "scale",
              class_weight: str | Mapping[ActionLabel, float] | None = "balanced",
              tol: float = 1e-3, cache_mb: float = 256.0,
              max_iter: int | None = None) -> SvmModel:
    """Fit the one-vs-one SVM. gamma "scale" resolves to 1/(d * Var(X)) on
    the full training matrix at fit time; no feature scaling is applied."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvariantViolation("X must be a 2-D matrix")
    if not np.all(np.isfinite(X)):
        raise InvariantViolation("X contains non-finite features")
    labels = [lab if isinstance(lab, ActionLabel) else ActionLabel(lab)
              for lab in y]
    if len(labels) != X.shape[0]:
        raise InvariantViolation("X and y lengths differ")
    present = [label for label in LABEL_ORDER if label in set(labels)]
    if len(present) < 2:
        raise InvariantViolation("need at least 2 distinct labels to train")
    if gamma == "scale":
        gamma_value = resolve_gamma_scale(X)
    else:
        gamma_value = float(gamma)
        if gamma_value <= 0:
            raise ValueError("gamma must be positive")
    counts = {label: labels.count(label) for label in present}
    if class_weight == "balanced":
        weights = balanced_class_weights(counts)
    elif class_weight is None:
        weights = {label: 1.0 for label in present}
    else:
        weights = {label: float(class_weight.get(label, 1.0)) for label in present}

    y_arr = np.array([label.value for label in labels])
    pairs: list[PairMachine] = []
    for a_pos in range(len(present)):
        for b_pos in range(a_pos + 1, len(present)):
            a, b = present[a_pos], present[b_pos]
            mask = (y_arr == a.value) | (y_arr == b.value)
            Xp = X[mask]
            sign = np.where(y_arr[mask] == a.value, 1.0, -1.0)
            Ci = np.where(sign > 0, C * weights[a], C * weights[b])
            alpha, bias, iters = smo_solve(Xp, sign, Ci, gamma_value,
                                           tol=tol, max_iter=max_iter,
                                           cache_mb=cache_mb)
            sv = alpha > 1e-12
            K_sv = rbf_kernel_matrix(Xp[sv], Xp, gamma_value)
            # objective uses the full subset; recompute via support rows only
            coef = alpha[sv] * sign[sv]
            quad = coef @ (K_sv[:, sv] @ coef)
            objective = float(0.5 * quad - alpha.sum())
            pairs.append(PairMachine(
                positive=a, negative=b,
                support_vectors=Xp[sv].copy(),
                dual_coef=coef,
                bias=bias,
                support_idx=np.flatnonzero(sv),
                objective=objective,
                iterations=iters,
            ))
    return SvmModel(
        label_order=tuple(present),
        pairs=pairs,
        gamma=gamma_value,
        C=C,
        class_weights=weights,
        feature_dim=X.shape[1],
        tol=tol,
        hyperparameters={"C": C, "gamma": "scale" if gamma == "scale" else gamma_value,
                         "class_weight": "balanced" if class_weight == "balanced"
                         else None if class_weight is None else dict(weights),
                         "tol": tol},
    )


def predict_svm(model: SvmModel, x: np.ndarray,
                ) -> tuple[ActionLabel, dict[ActionLabel, int], dict[ActionLabel, float]]:
    """Classify one vector: (label, per-label votes, per-label summed |margin|).

    Each pairwise machine votes; the majority label wins. Vote ties break by
    the largest summed absolute decision margin over won pairs, then by the
    canonical label order.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch("predict_svm expects a single feature vector")
    decisions = model.decision_values(x[None])
    return _vote({pair: float(vals[0]) for pair, vals in decisions.items()},
                 model.label_order)


def kkt_residuals(pair: PairMachine, X_pair: np.ndarray, y_sign: np.ndarray,
                  C_per_sample: np.ndarray, gamma: float) -> np.ndarray:
    """Per-point KKT residuals of a trained pair machine on its training set.

    alpha = 0      requires y f(x) >= 1: residual max(0, 1 - y f)
    0 < alpha < C  requires y f(x) = 1:  residual |1 - y f|
    alpha = C      requires y f(x) <= 1: residual max(0, y f - 1)
    """
    n = X_pair.shape[0]
    alpha = np.zeros(n)
    alpha[pair.support_idx] = np.abs(pair.dual_coef)
    f = rbf_kernel_matrix(X_pair, pair.support_vectors, gamma) @ pair.dual_coef \
        + pair.bias
    yf = y_sign * f
    at_zero = alpha <= 1e-9
    at_c = alpha >= C_per_sample - 1e-9
    res = np.abs(1.0 - yf)
    res[at_zero] = np.maximum(0.0, 1.0 - yf[at_zero])
    res[at_c] = np.maximum(0.0, yf[at_c] - 1.0)
    return res


def save_svm(model: SvmModel, path) -> None:
    tensors: dict[str, np.ndarray] = {}
    pair_meta = []
    for k, pair in enumerate(model.pairs):
        tensors[f"sv{k}"] = pair.support_vectors
        tensors[f"coef{k}"] = pair.dual_coef
        tensors[f"sv_idx{k}"] = pair.support_idx.astype(np.int64)
        pair_meta.append({
            "positive": pair.positive.value,
            "negative": pair.negative.value,
            "bias": pair.bias,
            "objective": pair.objective,
            "iterations": pair.iterations,
        })
    hp = dict(model.hyperparameters)
    hp.update({
        "gamma_value": model.gamma,
        "feature_dim": model.feature_dim,
        "label_order": [label.value for label in model.label_order],
        "class_weights": {label.value: w for label, w in model.class_weights.items()},
        "pairs": pair_meta,
    })
    save_container(path, "svm", hp, tensors)


def load_svm(path) -> SvmModel:
    meta, tensors = load_container(path, expect_kind="svm")
    hp = meta["hyperparameters"]
    pairs = []
    for k, pm in enumerate(hp["pairs"]):
        pairs.append(PairMachine(
            positive=ActionLabel(pm["positive"]),
            negative=ActionLabel(pm["negative"]),
            support_vectors=tensors[f"sv{k}"].astype(np.float64),
            dual_coef=tensors[f"coef{k}"].astype(np.float64),
            bias=float(pm["bias"]),
            support_idx=tensors[f"sv_idx{k}"].astype(np.int64),
            objective=float(pm["objective"]),
            iterations=int(pm["iterations"]),
        ))
        if pairs[-1].support_vectors.shape[0] != pairs[-1].dual_coef.shape[0]:
            raise DimensionMismatch(f"{path}: pair {k} support vectors and "
                                    "dual coefficients disagree")
    return SvmModel(
        label_order=tuple(ActionLabel(v) for v in hp["label_order"]),
        pairs=pairs,
        gamma=float(hp["gamma_value"]),
        C=float(hp["C"]),
        class_weights={ActionLabel(k): float(v)
                       for k, v in hp["class_weights"].items()},
        feature_dim=int(hp["feature_dim"]),
        tol=float(hp["tol"]),
        hyperparameters={k: hp[k] for k in ("C", "gamma", "class_weight", "tol")},
    )
