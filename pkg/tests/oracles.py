"""Independent oracles used by the test suite.

Everything here is deliberately written against the problem definitions, not
against the library code: layout enumeration by counting, dual SVM solving by
exhaustive active-set enumeration, vote aggregation by sorting, baselines by
direct computation. Keep these slow and obvious.
"""

from __future__ import annotations

import itertools

import numpy as np


def feature_index_map() -> dict[tuple[str, int, int], int]:
    """Enumerate the canonical 1682-entry layout by explicit counting.

    Keys are (block, point_index, coord) with coord 0..2 for x/y/z and the
    blendshape block using coord 0.
    """
    index = {}
    flat = 0
    for point in range(33):
        for coord in range(3):
            index[("body", point, coord)] = flat
            flat += 1
    for point in range(468):
        for coord in range(3):
            index[("face", point, coord)] = flat
            flat += 1
    for point in range(42):
        for coord in range(3):
            index[("hands", point, coord)] = flat
            flat += 1
    for slot in range(53):
        index[("blendshapes", slot, 0)] = flat
        flat += 1
    assert flat == 1682
    return index


def brute_force_qp(K: np.ndarray, y: np.ndarray, C: np.ndarray,
                   ) -> tuple[np.ndarray, float]:
    """Globally solve min 1/2 a'Qa - sum(a) s.t. y'a = 0, 0 <= a <= C by
    enumerating every active set (a_i at 0, at C_i, or free) and solving the
    stationarity system of the free block. Exponential: keep n <= 10.
    """
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    best_obj = np.inf
    best_alpha = None

    def objective(alpha: np.ndarray) -> float:
        return float(0.5 * alpha @ Q @ alpha - alpha.sum())

    for assignment in itertools.product((0, 1, 2), repeat=n):
        assignment = np.array(assignment)
        alpha = np.zeros(n)
        alpha[assignment == 1] = C[assignment == 1]
        free = assignment == 2
        bound_balance = float(y[~free] @ alpha[~free])
        nf = int(free.sum())
        if nf == 0:
            if abs(bound_balance) > 1e-9:
                continue
        else:
            # stationarity: Q_FF a_F + beta y_F = 1 - Q_FB a_B
            # equality:     y_F' a_F = -y_B' a_B
            A = np.zeros((nf + 1, nf + 1))
            A[:nf, :nf] = Q[np.ix_(free, free)]
            A[:nf, nf] = y[free]
            A[nf, :nf] = y[free]
            b = np.zeros(nf + 1)
            b[:nf] = 1.0 - Q[np.ix_(free, ~free)] @ alpha[~free]
            b[nf] = -bound_balance
            try:
                sol = np.linalg.solve(A, b)
            except np.linalg.LinAlgError:
                continue
            a_free = sol[:nf]
            if (a_free < -1e-9).any() or (a_free > C[free] + 1e-9).any():
                continue
            alpha[free] = np.clip(a_free, 0.0, C[free])
        obj = objective(alpha)
        if obj < best_obj - 1e-15:
            best_obj = obj
            best_alpha = alpha.copy()
    assert best_alpha is not None, "no feasible stationary point found"
    return best_alpha, best_obj


def aggregate_by_sorting(votes, priority) -> object:
    """Vote aggregation oracle: sort labels by (-count, priority rank)."""
    counts = {label: 0 for label in priority}
    for vote in votes:
        counts[vote] += 1
    rank = {label: k for k, label in enumerate(priority)}
    ordered = sorted(counts, key=lambda lab: (-counts[lab], rank[lab]))
    return ordered[0]


def last_value_rmse(windows) -> float:
    """Naive baseline: carry the last input frame forward over the horizon."""
    total, count = 0.0, 0
    for w in windows:
        pred = np.tile(w.inputs[-1], (w.target.shape[0], 1))
        diff = pred - w.target
        total += float(np.sum(diff * diff))
        count += diff.size
    return float(np.sqrt(total / count))


class SimpleTree:
    """Plain exhaustive-split CART with uniform weights, for tiny fixtures."""

    def __init__(self):
        self.node = None

    @staticmethod
    def _gini(y: np.ndarray) -> float:
        _, counts = np.unique(y, return_counts=True)
        p = counts / counts.sum()
        return 1.0 - float(np.dot(p, p))

    def fit(self, X: np.ndarray, y: np.ndarray):
        self.node = self._grow(X, y)
        return self

    def _grow(self, X, y):
        if len(np.unique(y)) == 1:
            return ("leaf", y[0])
        best = None
        for f in range(X.shape[1]):
            values = np.unique(X[:, f])
            for lo, hi in zip(values[:-1], values[1:]):
                thr = (lo + hi) / 2.0
                left = X[:, f] <= thr
                cost = (left.sum() * self._gini(y[left])
                        + (~left).sum() * self._gini(y[~left])) / len(y)
                if best is None or cost < best[0] - 1e-15:
                    best = (cost, f, thr)
        if best is None:
            values, counts = np.unique(y, return_counts=True)
            return ("leaf", values[counts.argmax()])
        _, f, thr = best
        left = X[:, f] <= thr
        return ("split", f, thr, self._grow(X[left], y[left]),
                self._grow(X[~left], y[~left]))

    def predict_one(self, x):
        node = self.node
        while node[0] == "split":
            _, f, thr, l, r = node
            node = l if x[f] <= thr else r
        return node[1]
