"""Confusion matrices and multi-class precision/recall/F1 reporting.

Matrices are oriented rows = predicted class, columns = correct class, with
the canonical class order (listen, speak, wait). Two fixed reference matrices
from the original field evaluation of this system are embedded as numeric
oracles so the whole metrics path can be regression-tested without data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvariantViolation
from .frames import LABEL_ORDER, ActionLabel

#: Held-out evaluation of the direct per-frame action classifier
#: (2,900 frames; rows = predicted, columns = correct, order listen/speak/wait).
REFERENCE_ACTION_MATRIX = (
    (396, 285, 64),
    (302, 575, 26),
    (15, 23, 1214),
)

#: Held-out evaluation of the forecast-then-classify timing pipeline on the
#: same 2,900 frames.
REFERENCE_TIMING_MATRIX = (
    (318, 234, 80),
    (380, 634, 42),
    (15, 15, 1182),
)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Integer count matrix, rows = predicted class, columns = correct class."""

    counts: np.ndarray
    labels: tuple[ActionLabel, ...] = LABEL_ORDER

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.labels)
        if counts.shape != (k, k):
            raise InvariantViolation(
                f"confusion matrix shape {counts.shape} does not match "
                f"{k} classes")
        if (counts < 0).any():
            raise InvariantViolation("confusion matrix counts must be >= 0")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def support(self) -> dict[ActionLabel, int]:
        """Per-class support = column sums (true class sizes)."""
        return {label: int(self.counts[:, k].sum())
                for k, label in enumerate(self.labels)}

    def format_table(self) -> str:
        names = [label.value for label in self.labels]
        width = max(8, max(len(n) for n in names) + 2)
        lines = [" " * 21 + "correct class",
                 " " * 21 + "".join(f"{n:>{width}}" for n in names)]
        for r, name in enumerate(names):
            prefix = "predicted " if r == 0 else " " * 10
            row = "".join(f"{int(c):>{width}}" for c in self.counts[r])
            lines.append(f"{prefix}{name:>10} {row}")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {
            "orientation": "rows=predicted, columns=correct",
            "labels": [label.value for label in self.labels],
            "counts": self.counts.tolist(),
        }


def confusion(predicted: Sequence[ActionLabel | str],
              correct: Sequence[ActionLabel | str],
              labels: tuple[ActionLabel, ...] = LABEL_ORDER) -> ConfusionMatrix:
    """Count cell (p, c) for every frame predicted p whose truth is c."""
    if len(predicted) != len(correct):
        raise InvariantViolation(
            f"length mismatch: {len(predicted)} predictions vs "
            f"{len(correct)} labels")
    if not predicted:
        raise InvariantViolation("cannot build a confusion matrix from "
                                 "zero samples")
    index = {label: k for k, label in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for p, c in zip(predicted, correct):
        p = p if isinstance(p, ActionLabel) else ActionLabel(p)
        c = c if isinstance(c, ActionLabel) else ActionLabel(c)
        counts[index[p], index[c]] += 1
    return ConfusionMatrix(counts=counts, labels=labels)


@dataclass(frozen=True)
class MetricsReport:
    labels: tuple[ActionLabel, ...]
    precision: dict[ActionLabel, float]
    recall: dict[ActionLabel, float]
    f1: dict[ActionLabel, float]
    support: dict[ActionLabel, int]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    degenerate: tuple[ActionLabel, ...] = ()

    def as_dict(self) -> dict:
        return {
            "per_class": {
                label.value: {
                    "precision": self.precision[label],
                    "recall": self.recall[label],
                    "f1": self.f1[label],
                    "support": self.support[label],
                }
                for label in self.labels
            },
            "accuracy": self.accuracy,
            "macro": {"precision": self.macro_precision,
                      "recall": self.macro_recall, "f1": self.macro_f1},
            "weighted": {"precision": self.weighted_precision,
                         "recall": self.weighted_recall,
                         "f1": self.weighted_f1},
            "degenerate_classes": [label.value for label in self.degenerate],
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)

    def format_table(self) -> str:
        """Human-readable table: percentages with one decimal for accuracy,
        integers for the averaged rows."""
        lines = [f"{'class':>10} {'precision':>10} {'recall':>10} "
                 f"{'f1':>10} {'support':>8}"]
        for label in self.labels:
            lines.append(
                f"{label.value:>10} {self.precision[label]:>10.4f} "
                f"{self.recall[label]:>10.4f} {self.f1[label]:>10.4f} "
                f"{self.support[label]:>8d}")
        lines.append(f"{'macro avg':>10} {self.macro_precision * 100:>9.0f}% "
                     f"{self.macro_recall * 100:>9.0f}% "
                     f"{self.macro_f1 * 100:>9.0f}% "
                     f"{sum(self.support.values()):>8d}")
        lines.append(f"{'weighted':>10} {self.weighted_precision * 100:>9.0f}% "
                     f"{self.weighted_recall * 100:>9.0f}% "
                     f"{self.weighted_f1 * 100:>9.0f}% "
                     f"{sum(self.support.values()):>8d}")
        lines.append(f"{'accuracy':>10} {self.accuracy * 100:>42.1f}%")
        return "\n".join(lines)


def report(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class precision/recall/F1 plus macro, support-weighted averages and
    accuracy. A zero-support class gets zeroed metrics and a degeneracy flag;
    F1 is 0 whenever precision + recall is 0."""
    counts = cm.counts.astype(np.float64)
    k = len(cm.labels)
    diag = np.diag(counts)
    row_sums = counts.sum(axis=1)
    col_sums = counts.sum(axis=0)
    total = counts.sum()
    with np.errstate(invalid="ignore", divide="ignore"):
        precision = np.where(row_sums > 0, diag / row_sums, 0.0)
        recall = np.where(col_sums > 0, diag / col_sums, 0.0)
        pr = precision + recall
        f1 = np.where(pr > 0, 2.0 * precision * recall / np.where(pr > 0, pr, 1.0),
                      0.0)
    degenerate = tuple(label for j, label in enumerate(cm.labels)
                       if col_sums[j] == 0)
    weights = col_sums / total
    return MetricsReport(
        labels=cm.labels,
        precision={label: float(precision[j]) for j, label in enumerate(cm.labels)},
        recall={label: float(recall[j]) for j, label in enumerate(cm.labels)},
        f1={label: float(f1[j]) for j, label in enumerate(cm.labels)},
        support={label: int(col_sums[j]) for j, label in enumerate(cm.labels)},
        accuracy=float(diag.sum() / total),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        weighted_precision=float((precision * weights).sum()),
        weighted_recall=float((recall * weights).sum()),
        weighted_f1=float((f1 * weights).sum()),
        degenerate=degenerate,
    )


def reference_matrices() -> dict[str, ConfusionMatrix]:
    return {
        "action_classifier": ConfusionMatrix(np.array(REFERENCE_ACTION_MATRIX)),
        "timing_classifier": ConfusionMatrix(np.array(REFERENCE_TIMING_MATRIX)),
    }


def rmse_report(model, windows) -> float:
    """Forecast RMSE for combined run summaries; thin delegation."""
    from .forecaster import forecast_rmse
    return forecast_rmse(model, windows)


def run_summary(cm: ConfusionMatrix, metrics: MetricsReport,
                forecast_rmse_value: float | None = None,
                n_recordings: int | None = None) -> dict:
    """Machine-readable summary combining classification and forecast metrics."""
    out = {
        "classification": metrics.as_dict(),
        "confusion": cm.as_dict(),
        "n_frames": cm.total,
    }
    if forecast_rmse_value is not None:
        out["forecast_rmse"] = forecast_rmse_value
    if n_recordings is not None:
        out["n_recordings"] = n_recordings
    return out
