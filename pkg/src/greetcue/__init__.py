"""Body-language based timing of conversation openings.

The toolkit featurizes per-frame pose/face/hand landmarks, forecasts the next
half second of body language, classifies the robot's appropriate action
(wait, speak, listen) and exposes the combined per-frame decision loop both
offline and as a streaming service.
"""

from .classifier import (ForestModel, GridSearchReport, SvmModel, grid_search,
                         load_forest, load_svm, predict_forest, predict_svm,
                         resolve_gamma_scale, save_forest, save_svm,
                         train_forest, train_svm)
from .errors import (ConvergenceError, DimensionMismatch, GreetcueError,
                     InvariantViolation, RecordingParseError, SchemaError,
                     TrainingDivergence)
from .forecaster import (ForecastModel, TrainConfig, forecast, forecast_rmse,
                         gradient_check, load_forecaster, save_forecaster,
                         train_forecaster)
from .frames import (FEATURE_LENGTH, LABEL_ORDER, ActionLabel, Frame, Landmark,
                     Recording, featurize, read_manifest, read_recordings,
                     write_manifest, write_recordings)
from .metrics import (ConfusionMatrix, MetricsReport, confusion,
                      reference_matrices, report, run_summary)
from .pipeline import (Decision, PipelineState, TypeClassifierStub,
                       aggregate_votes, dispatch, evaluate_recordings,
                       run_recording, timing_step)
from .synthgen import VisitorProfile, generate_dataset, generate_recording
from .windows import (DatasetSplit, WindowSample, balanced_class_weights,
                      make_windows, split_dataset, windows_from_recordings)

__version__ = "0.1.0"

__all__ = [
    "ActionLabel",
    "ConfusionMatrix",
    "ConvergenceError",
    "DatasetSplit",
    "Decision",
    "DimensionMismatch",
    "FEATURE_LENGTH",
    "ForecastModel",
    "ForestModel",
    "Frame",
    "GreetcueError",
    "GridSearchReport",
    "InvariantViolation",
    "LABEL_ORDER",
    "Landmark",
    "MetricsReport",
    "PipelineState",
    "Recording",
    "RecordingParseError",
    "SchemaError",
    "SvmModel",
    "TrainConfig",
    "TrainingDivergence",
    "TypeClassifierStub",
    "VisitorProfile",
    "WindowSample",
    "aggregate_votes",
    "balanced_class_weights",
    "confusion",
    "dispatch",
    "evaluate_recordings",
    "featurize",
    "forecast",
    "forecast_rmse",
    "generate_dataset",
    "generate_recording",
    "gradient_check",
    "grid_search",
    "load_forecaster",
    "load_forest",
    "load_svm",
    "make_windows",
    "predict_forest",
    "predict_svm",
    "read_manifest",
    "read_recordings",
    "reference_matrices",
    "report",
    "resolve_gamma_scale",
    "run_recording",
    "run_summary",
    "save_forecaster",
    "save_forest",
    "save_svm",
    "split_dataset",
    "timing_step",
    "train_forecaster",
    "train_forest",
    "train_svm",
    "windows_from_recordings",
    "write_manifest",
    "write_recordings",
]
