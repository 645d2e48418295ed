"""Per-frame decision loop: warm-up classification, forecast-then-classify,
vote aggregation, and routing of the resulting action.

The first 10 frames of a session are classified directly (the forecaster has
no history yet). From frame index 10 on, the buffered 10 real frames are
forecast 5 frames ahead, each forecast frame is classified, and the majority
label wins with tie-break priority listen > speak > wait. The buffer only
ever holds real observed frames; forecasts are never fed back.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import DimensionMismatch, InvariantViolation
from .forecaster import ForecastModel, forecast
from .frames import LABEL_ORDER, ActionLabel, Frame, Recording, featurize
from .metrics import ConfusionMatrix, MetricsReport, confusion, report

WARMUP_FRAMES = 10

DISPATCH_DISCARD = "discard"
DISPATCH_TYPE_CLASSIFIER = "to_type_classifier"

#: Routing signal attached to forwarded decisions: speak asks for a greeting,
#: listen switches the robot to listening ahead of the user's utterance.
SIGNALS = {ActionLabel.SPEAK: "greet-request", ActionLabel.LISTEN: "enter-listen"}


class ActionModel(Protocol):
    feature_dim: int

    def predict(self, x: np.ndarray) -> ActionLabel: ...

    def predict_many(self, X: np.ndarray) -> list[ActionLabel]: ...


@dataclass
class Decision:
    frame_index: int
    action: ActionLabel
    mode: str  # "warmup" | "forecast"
    votes: tuple[ActionLabel, ...] | None = None
    dispatch: str | None = None
    signal: str | None = None

    def record(self) -> dict:
        """Canonical export record; key order is part of the log format."""
        rec: dict = {"i": self.frame_index, "action": self.action.value,
                     "mode": self.mode}
        if self.votes is not None:
            rec["votes"] = [v.value for v in self.votes]
        if self.dispatch is not None:
            rec["dispatch"] = self.dispatch
        return rec


def decision_log_line(decision: Decision) -> str:
    return json.dumps(decision.record(), separators=(",", ":"))


def aggregate_votes(votes: Sequence[ActionLabel]) -> ActionLabel:
    """Majority label; ties break by priority listen > speak > wait.

    Always returns a label that actually appears among the votes.
    """
    if not votes:
        raise InvariantViolation("cannot aggregate an empty vote list")
    counts = {label: 0 for label in LABEL_ORDER}
    for vote in votes:
        counts[vote] += 1
    best = max(counts.values())
    for label in LABEL_ORDER:
        if counts[label] == best:
            return label
    raise AssertionError("unreachable")


class TypeClassifierStub:
    """Declared no-op handoff target: records forwarded decisions only.

    Greeting-formula selection itself is out of scope; this stub is the seam
    where it would attach.
    """

    def __init__(self):
        self.handoffs: list[tuple[int, ActionLabel, str]] = []

    def __call__(self, decision: Decision) -> None:
        self.handoffs.append((decision.frame_index, decision.action,
                              decision.signal or ""))


def dispatch(decision: Decision,
             type_classifier: Callable[[Decision], None] | None = None,
             ) -> Decision:
    """Route a decision: wait is discarded; speak and listen are handed to
    the type-classifier hook with their routing signal."""
    if decision.action is ActionLabel.WAIT:
        decision.dispatch = DISPATCH_DISCARD
        decision.signal = None
        return decision
    decision.dispatch = DISPATCH_TYPE_CLASSIFIER
    decision.signal = SIGNALS[decision.action]
    if type_classifier is not None:
        type_classifier(decision)
    return decision


@dataclass
class PipelineState:
    """Per-session state: ring buffer of the last 10 featurized real frames.

    Single-consumer: calls must be serialized per session. The referenced
    models are read-only and may be shared across sessions.
    """

    forecast_model: ForecastModel
    action_model: ActionModel
    session_id: str = ""
    visibility_threshold: float = 0.5
    buffer: deque = field(default_factory=lambda: deque(maxlen=WARMUP_FRAMES))
    frame_counter: int = 0

    def __post_init__(self):
        self.buffer = deque(maxlen=self.forecast_model.in_len)
        if self.forecast_model.feature_dim != self.action_model.feature_dim:
            raise DimensionMismatch(
                f"forecaster feature dim {self.forecast_model.feature_dim} != "
                f"classifier feature dim {self.action_model.feature_dim}")

    @property
    def warmup_len(self) -> int:
        return self.forecast_model.in_len

    def step_features(self, features: np.ndarray, frame_index: int) -> Decision:
        features = np.asarray(features, dtype=np.float64)
        if features.shape != (self.forecast_model.feature_dim,):
            raise DimensionMismatch(
                f"feature vector of length {features.shape} does not match "
                f"model dim {self.forecast_model.feature_dim}")
        if frame_index != self.frame_counter:
            raise InvariantViolation(
                f"out-of-order frame: expected index {self.frame_counter}, "
                f"got {frame_index}", session_id=self.session_id,
                frame_index=frame_index)
        if self.frame_counter < self.warmup_len:
            decision = Decision(frame_index=frame_index,
                                action=self.action_model.predict(features),
                                mode="warmup")
        else:
            window = np.stack(self.buffer)
            horizon = forecast(self.forecast_model, window)
            votes = tuple(self.action_model.predict_many(horizon))
            decision = Decision(frame_index=frame_index,
                                action=aggregate_votes(votes),
                                mode="forecast", votes=votes)
        self.buffer.append(features)
        self.frame_counter += 1
        return decision


def timing_step(state: PipelineState, frame: Frame) -> Decision:
    """Advance the pipeline by one real frame and decide the robot's action."""
    return state.step_features(
        featurize(frame, state.visibility_threshold), frame.frame_index)


def run_recording(forecast_model: ForecastModel, action_model: ActionModel,
                  recording: Recording,
                  type_classifier: Callable[[Decision], None] | None = None,
                  compare_at_forecast_time: bool = False,
                  ) -> tuple[list[Decision], tuple[ConfusionMatrix, MetricsReport] | None]:
    """Replay one recording through a fresh pipeline state.

    Returns one routed decision per frame, in order, plus an evaluation
    against the recording's labels when present. By default the decision at
    frame t is compared with the label at t; with compare_at_forecast_time,
    forecast-mode decisions are compared with the label at t + out_len (the
    time they anticipate), dropping frames whose target lies past the end.
    """
    state = PipelineState(forecast_model=forecast_model,
                          action_model=action_model,
                          session_id=recording.session_id)
    decisions = []
    for frame in recording.frames:
        decision = timing_step(state, frame)
        decisions.append(dispatch(decision, type_classifier))
    if recording.labels is None:
        return decisions, None
    pairs = list(_compared_pairs(decisions, recording.labels,
                                 forecast_model.out_len,
                                 compare_at_forecast_time))
    if not pairs:
        return decisions, None
    cm = confusion([p for p, _ in pairs], [t for _, t in pairs])
    return decisions, (cm, report(cm))


def _compared_pairs(decisions, labels, horizon, compare_at_forecast_time):
    """(predicted, truth) pairs; in forecast-time mode a forecast decision at
    t scores against the label at t + horizon and tail frames drop out."""
    for decision in decisions:
        target = decision.frame_index
        if compare_at_forecast_time and decision.mode == "forecast":
            target += horizon
            if target >= len(labels):
                continue
        yield decision.action, labels[target]


def evaluate_recordings(forecast_model: ForecastModel, action_model: ActionModel,
                        recordings: Sequence[Recording],
                        compare_at_forecast_time: bool = False,
                        ) -> tuple[ConfusionMatrix, MetricsReport, list[list[Decision]]]:
    """Aggregate run_recording over several labeled recordings into one
    confusion matrix and report."""
    predicted: list[ActionLabel] = []
    truth: list[ActionLabel] = []
    logs: list[list[Decision]] = []
    for recording in recordings:
        if recording.labels is None:
            raise InvariantViolation("evaluation needs labeled recordings",
                                     session_id=recording.session_id)
        decisions, _ = run_recording(forecast_model, action_model, recording,
                                     compare_at_forecast_time=compare_at_forecast_time)
        logs.append(decisions)
        for p, t in _compared_pairs(decisions, recording.labels,
                                    forecast_model.out_len,
                                    compare_at_forecast_time):
            predicted.append(p)
            truth.append(t)
    cm = confusion(predicted, truth)
    return cm, report(cm), logs
