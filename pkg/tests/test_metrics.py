from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greetcue.errors import InvariantViolation
from greetcue.forecaster import ForecastModel, forecast_rmse
from greetcue.frames import LABEL_ORDER, ActionLabel
from greetcue.metrics import (REFERENCE_ACTION_MATRIX, REFERENCE_TIMING_MATRIX,
                              ConfusionMatrix, confusion, reference_matrices,
                              report, rmse_report, run_summary)
from greetcue.windows import WindowSample

W, S, L = ActionLabel.WAIT, ActionLabel.SPEAK, ActionLabel.LISTEN


def pairs_from_matrix(matrix) -> tuple[list[ActionLabel], list[ActionLabel]]:
    """Replay a confusion matrix into (predicted, correct) label streams."""
    predicted, correct = [], []
    for r, row in enumerate(matrix):
        for c, count in enumerate(row):
            predicted.extend([LABEL_ORDER[r]] * count)
            correct.extend([LABEL_ORDER[c]] * count)
    return predicted, correct


class TestConfusion:
    def test_all_correct_diagonal(self):
        cm = confusion([W] * 5, [W] * 5)
        assert cm.counts[2, 2] == 5
        assert cm.counts.sum() == 5
        assert np.trace(cm.counts) == 5

    def test_single_off_diagonal_pair(self):
        cm = confusion([L], [S])
        assert cm.counts[0, 1] == 1
        assert cm.counts.sum() == 1

    def test_replayed_reference_fixture_reconstructs_exactly(self):
        predicted, correct = pairs_from_matrix(REFERENCE_TIMING_MATRIX)
        assert len(predicted) == 2900
        cm = confusion(predicted, correct)
        assert np.array_equal(cm.counts, np.array(REFERENCE_TIMING_MATRIX))

    def test_length_mismatch(self):
        with pytest.raises(InvariantViolation):
            confusion([W], [W, S])

    def test_empty_rejected(self):
        with pytest.raises(InvariantViolation):
            confusion([], [])

    def test_column_sums_are_support(self):
        cm = ConfusionMatrix(np.array(REFERENCE_TIMING_MATRIX))
        support = cm.support()
        assert support[L] == 713
        assert support[S] == 883
        assert support[W] == 1304


class TestReport:
    def test_timing_reference_metrics(self):
        rep = report(ConfusionMatrix(np.array(REFERENCE_TIMING_MATRIX)))
        assert rep.accuracy == pytest.approx(0.7359, abs=5e-5)
        assert rep.macro_f1 == pytest.approx(0.689, abs=5e-4)
        assert rep.weighted_f1 == pytest.approx(0.74, abs=5e-3)

    def test_action_reference_accuracy(self):
        rep = report(ConfusionMatrix(np.array(REFERENCE_ACTION_MATRIX)))
        assert rep.accuracy == pytest.approx(0.7534, abs=5e-5)

    def test_hand_computed_per_class_values(self):
        rep = report(ConfusionMatrix(np.array(REFERENCE_TIMING_MATRIX)))
        assert rep.precision[W] == pytest.approx(1182 / 1212, abs=1e-12)
        assert rep.recall[W] == pytest.approx(1182 / 1304, abs=1e-12)

    def test_weighted_recall_equals_accuracy(self):
        rng = np.random.default_rng(0)
        counts = rng.integers(1, 50, size=(3, 3))
        rep = report(ConfusionMatrix(counts))
        assert rep.weighted_recall == pytest.approx(rep.accuracy, rel=1e-12)

    def test_equal_supports_macro_equals_weighted(self):
        counts = np.array([[8, 1, 1], [1, 8, 1], [1, 1, 8]])
        rep = report(ConfusionMatrix(counts))
        assert rep.macro_precision == pytest.approx(rep.weighted_precision)
        assert rep.macro_f1 == pytest.approx(rep.weighted_f1)

    def test_zero_support_flagged_as_degenerate(self):
        counts = np.array([[5, 2, 0], [1, 4, 0], [0, 0, 0]])
        rep = report(ConfusionMatrix(counts))
        assert rep.degenerate == (W,)
        assert rep.recall[W] == 0.0
        assert rep.f1[W] == 0.0

    @given(st.lists(st.integers(0, 40), min_size=9, max_size=9))
    @settings(max_examples=60, deadline=None)
    def test_permutation_equivariance(self, cells):
        counts = np.array(cells).reshape(3, 3)
        if counts.sum() == 0:
            counts[0, 0] = 1
        base = report(ConfusionMatrix(counts))
        perm = (2, 0, 1)
        permuted_counts = counts[np.ix_(perm, perm)]
        permuted_labels = tuple(LABEL_ORDER[p] for p in perm)
        twisted = report(ConfusionMatrix(permuted_counts,
                                         labels=permuted_labels))
        assert twisted.accuracy == pytest.approx(base.accuracy)
        assert twisted.macro_f1 == pytest.approx(base.macro_f1)
        assert twisted.weighted_f1 == pytest.approx(base.weighted_f1)
        for label in LABEL_ORDER:
            assert twisted.precision[label] == pytest.approx(
                base.precision[label])
            assert twisted.recall[label] == pytest.approx(base.recall[label])

    def test_all_values_in_unit_interval(self):
        rep = report(ConfusionMatrix(np.array(REFERENCE_ACTION_MATRIX)))
        values = [rep.accuracy, rep.macro_precision, rep.macro_recall,
                  rep.macro_f1, rep.weighted_precision, rep.weighted_recall,
                  rep.weighted_f1]
        values += list(rep.precision.values()) + list(rep.recall.values()) \
            + list(rep.f1.values())
        assert all(0.0 <= v <= 1.0 for v in values)


class TestRmseDelegation:
    def _model_and_windows(self):
        model = ForecastModel(feature_dim=4, hidden=6, in_len=3, out_len=2,
                              seed=0)
        rng = np.random.default_rng(1)
        windows = [WindowSample(inputs=rng.uniform(size=(3, 4)),
                                target=rng.uniform(size=(2, 4)),
                                session_id="m", start=k) for k in range(4)]
        return model, windows

    def test_perfect_prediction_zero(self):
        model, windows = self._model_and_windows()
        batch = model.predict_raw_batch(np.stack([w.inputs for w in windows]))
        perfect = [WindowSample(inputs=w.inputs, target=batch[k],
                                session_id="p", start=0)
                   for k, w in enumerate(windows)]
        assert rmse_report(model, perfect) == 0.0

    def test_delegation_identity(self):
        model, windows = self._model_and_windows()
        assert rmse_report(model, windows) == forecast_rmse(model, windows)

    def test_summary_schema(self):
        cm = ConfusionMatrix(np.array(REFERENCE_TIMING_MATRIX))
        rep = report(cm)
        summary = run_summary(cm, rep, forecast_rmse_value=0.0426,
                              n_recordings=22)
        blob = json.loads(json.dumps(summary))
        assert blob["forecast_rmse"] == 0.0426
        assert blob["n_frames"] == 2900
        assert blob["n_recordings"] == 22
        assert "accuracy" in blob["classification"]
        assert blob["confusion"]["labels"] == ["listen", "speak", "wait"]


def test_reference_matrices_named():
    refs = reference_matrices()
    assert set(refs) == {"action_classifier", "timing_classifier"}
    assert refs["action_classifier"].total == 2900
