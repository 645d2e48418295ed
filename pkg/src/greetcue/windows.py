"""Dataset preparation: sliding windows, recording-level splits, class weights."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InvariantViolation
from .frames import (DEFAULT_VISIBILITY_THRESHOLD, LABEL_ORDER, ActionLabel,
                     Recording)

FORECAST_INPUT_LEN = 10
FORECAST_OUTPUT_LEN = 5


@dataclass(frozen=True)
class WindowSample:
    """A forecaster training sample: ``in_len`` consecutive feature vectors
    and the ``out_len`` vectors that immediately follow them."""

    inputs: np.ndarray   # (in_len, d)
    target: np.ndarray   # (out_len, d)
    session_id: str
    start: int

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.target.ndim != 2:
            raise InvariantViolation("window blocks must be 2-D matrices",
                                     session_id=self.session_id)
        if self.inputs.shape[1] != self.target.shape[1]:
            raise InvariantViolation("input/target feature dims differ",
                                     session_id=self.session_id)


def make_windows(recording: Recording,
                 in_len: int = FORECAST_INPUT_LEN,
                 out_len: int = FORECAST_OUTPUT_LEN,
                 stride: int = 1,
                 visibility_threshold: float = DEFAULT_VISIBILITY_THRESHOLD,
                 ) -> list[WindowSample]:
    """Slide a (in_len + out_len)-frame window over one recording.

    Returns max(0, N - (in_len + out_len) + 1) windows at stride 1, ordered
    by start index. Windows never straddle recording boundaries; short
    recordings yield an empty list.
    """
    if in_len < 1 or out_len < 1 or stride < 1:
        raise ValueError("in_len, out_len and stride must all be >= 1")
    span = in_len + out_len
    n = len(recording)
    if n < span:
        return []
    features = recording.feature_matrix(visibility_threshold)
    windows = []
    for start in range(0, n - span + 1, stride):
        windows.append(WindowSample(
            inputs=features[start:start + in_len],
            target=features[start + in_len:start + span],
            session_id=recording.session_id,
            start=start,
        ))
    return windows


def windows_from_recordings(recordings: Sequence[Recording],
                            in_len: int = FORECAST_INPUT_LEN,
                            out_len: int = FORECAST_OUTPUT_LEN,
                            stride: int = 1,
                            ) -> list[WindowSample]:
    out: list[WindowSample] = []
    for recording in recordings:
        out.extend(make_windows(recording, in_len, out_len, stride))
    return out


@dataclass(frozen=True)
class DatasetSplit:
    """Recording-level train/test assignment with per-class frame counts."""

    train: tuple[Recording, ...]
    test: tuple[Recording, ...]
    train_counts: dict[ActionLabel, int]
    test_counts: dict[ActionLabel, int]

    @property
    def train_total(self) -> int:
        return sum(self.train_counts.values())

    @property
    def test_total(self) -> int:
        return sum(self.test_counts.values())

    def format_table(self) -> str:
        """Counts per class and side, with row-wise train/test percentages."""
        lines = [f"{'':14s} {'Train':>16s} {'Test':>16s} {'Total':>8s}"]

        def row(name: str, tr: int, te: int) -> str:
            tot = tr + te
            ptr = 100.0 * tr / tot if tot else 0.0
            pte = 100.0 * te / tot if tot else 0.0
            return (f"{name:14s} {tr:8d} ({ptr:4.1f}%) {te:8d} ({pte:4.1f}%) "
                    f"{tot:8d}")

        lines.append(row("instances", self.train_total, self.test_total))
        for label in LABEL_ORDER:
            lines.append(row(f"class {label.value!r}",
                             self.train_counts[label], self.test_counts[label]))
        lines.append(f"{'recordings':14s} {len(self.train):8d} {'':8s} "
                     f"{len(self.test):8d} {'':8s} "
                     f"{len(self.train) + len(self.test):8d}")
        return "\n".join(lines)


def _tally(recordings: Sequence[Recording]) -> dict[ActionLabel, int]:
    counts = {label: 0 for label in LABEL_ORDER}
    for recording in recordings:
        for label, n in recording.label_counts().items():
            counts[label] += n
    return counts


def split_dataset(recordings: Sequence[Recording], test_fraction: float,
                  seed: int, candidates: int = 64) -> DatasetSplit:
    """Split at recording granularity, stratified to give the test side a
    class mix close to the global mix.

    The test size is round(n * test_fraction) recordings, clamped to leave
    both sides non-empty. Among ``candidates`` seeded random assignments the
    one whose test class distribution is closest (L1) to the global
    distribution is kept, so the result is deterministic for a fixed seed.
    """
    n = len(recordings)
    if n < 2:
        raise InvariantViolation("need at least 2 recordings to split")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    for recording in recordings:
        if recording.labels is None:
            raise InvariantViolation("recordings must be labeled for a "
                                     "stratified split",
                                     session_id=recording.session_id)
    n_test = int(round(n * test_fraction))
    n_test = min(max(n_test, 1), n - 1)

    global_counts = _tally(recordings)
    total = sum(global_counts.values())
    if total == 0:
        raise InvariantViolation("recordings contain no labeled frames")
    global_dist = np.array([global_counts[c] / total for c in LABEL_ORDER])

    per_rec = np.array([[rec.label_counts()[c] for c in LABEL_ORDER]
                        for rec in recordings], dtype=np.float64)
    rng = np.random.default_rng(seed)
    best_idx: np.ndarray | None = None
    best_score = np.inf
    for _ in range(max(1, candidates)):
        perm = rng.permutation(n)
        test_idx = perm[:n_test]
        counts = per_rec[test_idx].sum(axis=0)
        if counts.sum() == 0:
            continue
        score = float(np.abs(counts / counts.sum() - global_dist).sum())
        if score < best_score:
            best_score = score
            best_idx = np.sort(test_idx)
    assert best_idx is not None
    test_set = set(int(i) for i in best_idx)
    train = tuple(rec for i, rec in enumerate(recordings) if i not in test_set)
    test = tuple(rec for i, rec in enumerate(recordings) if i in test_set)
    return DatasetSplit(train=train, test=test,
                        train_counts=_tally(train), test_counts=_tally(test))


def balanced_class_weights(label_counts: Mapping[ActionLabel | str, int],
                           ) -> dict[ActionLabel, float]:
    """weight(c) = total / (n_classes * count(c)).

    The weighted total mass equals the unweighted total. Any class with a
    zero count is an error: it cannot be trained on.
    """
    counts: dict[ActionLabel, int] = {}
    for key, value in label_counts.items():
        label = key if isinstance(key, ActionLabel) else ActionLabel(key)
        counts[label] = int(value)
    if not counts:
        raise InvariantViolation("no classes given")
    for label, count in counts.items():
        if count <= 0:
            raise InvariantViolation(
                f"class {label.value!r} is absent from the training data")
    total = sum(counts.values())
    k = len(counts)
    return {label: total / (k * count) for label, count in counts.items()}
