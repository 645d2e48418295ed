"""Command-line interface for the full train/evaluate/simulate/serve workflow."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import classifier as clf
from . import forecaster as fc
from . import metrics as mx
from . import pipeline as pl
from . import service, synthgen, windows
from .errors import GreetcueError, InvariantViolation
from .frames import (MANIFEST_NAME, Recording, parse_label, read_manifest,
                     read_recording_file, read_recordings, write_manifest)

MODEL_DIR_ENV = "GREETCUE_MODEL_DIR"
FORECASTER_FILE = "forecaster.npz"
CLASSIFIER_FILE = "classifier.npz"


def _load_dataset(data_dir: str) -> tuple[list[Recording], dict]:
    manifest = read_manifest(data_dir)
    recordings = []
    for entry in manifest["sessions"]:
        recordings.extend(read_recording_file(os.path.join(data_dir,
                                                           entry["file"])))
    return recordings, manifest


def _select_subset(data_dir: str, subset: str) -> list[Recording]:
    recordings, manifest = _load_dataset(data_dir)
    if subset == "all":
        return recordings
    split_of = {entry["id"]: entry.get("split") for entry in manifest["sessions"]}
    if any(split_of[r.session_id] is None for r in recordings):
        raise InvariantViolation(
            f"dataset {data_dir} has no split assignment; run "
            f"'greetcue split' first or pass --subset all")
    return [r for r in recordings if split_of[r.session_id] == subset]


def _load_action_model(path: str):
    from .serialization import sniff_kind
    kind = sniff_kind(path)
    if kind == "svm":
        return clf.load_svm(path)
    if kind == "forest":
        return clf.load_forest(path)
    raise GreetcueError(f"{path}: container kind {kind!r} is not a classifier")


def _model_paths(args) -> tuple[str, str]:
    base = args.models or os.environ.get(MODEL_DIR_ENV) or "models"
    forecaster = getattr(args, "forecaster", None) or os.path.join(
        base, FORECASTER_FILE)
    classifier = getattr(args, "classifier", None) or os.path.join(
        base, CLASSIFIER_FILE)
    return forecaster, classifier


def _cmd_simulate(args) -> int:
    manifest = synthgen.generate_dataset(args.n, args.seed, args.out)
    total = sum(entry["frames"] for entry in manifest["sessions"])
    print(f"wrote {args.n} recordings ({total} frames) to {args.out}")
    return 0


def _cmd_split(args) -> int:
    recordings, manifest = _load_dataset(args.data)
    split = windows.split_dataset(recordings, args.test_fraction, args.seed)
    test_ids = {r.session_id for r in split.test}
    for entry in manifest["sessions"]:
        entry["split"] = "test" if entry["id"] in test_ids else "train"
    manifest["split_seed"] = args.seed
    manifest["test_fraction"] = args.test_fraction
    write_manifest(args.data, manifest)
    print(split.format_table())
    print(f"updated {os.path.join(args.data, MANIFEST_NAME)}")
    return 0


def _cmd_train_forecaster(args) -> int:
    recordings = _select_subset(args.data, args.subset)
    samples = windows.windows_from_recordings(recordings, in_len=args.in_len,
                                              out_len=args.out_len)
    if not samples:
        raise InvariantViolation("no training windows: recordings shorter "
                                 f"than {args.in_len + args.out_len} frames")
    config = fc.TrainConfig(epochs=args.epochs, batch_size=args.batch_size,
                            learning_rate=args.lr, seed=args.seed)
    print(f"training forecaster on {len(samples)} windows from "
          f"{len(recordings)} recordings ({args.epochs} epochs)")
    model = fc.train_forecaster(samples, config, hidden=args.hidden,
                                layers=args.layers, cell=args.cell)
    fc.save_forecaster(model, args.out)
    print(f"epoch 1 full-batch mse {model.first_epoch_loss:.6g}; "
          f"epoch {args.epochs} full-batch mse {model.final_epoch_loss:.6g}")
    print(f"saved {args.out}")
    return 0


def _features_and_labels(recordings: list[Recording]) -> tuple[np.ndarray, list]:
    blocks, labels = [], []
    for recording in recordings:
        if recording.labels is None:
            raise InvariantViolation("classifier training needs labels",
                                     session_id=recording.session_id)
        blocks.append(recording.feature_matrix())
        labels.extend(recording.labels)
    return np.concatenate(blocks, axis=0), labels


def _cmd_train_classifier(args) -> int:
    recordings = _select_subset(args.data, args.subset)
    X, y = _features_and_labels(recordings)
    print(f"training {args.model} on {X.shape[0]} frames")
    class_weight = None if args.class_weight == "none" else args.class_weight
    if args.model == "svm":
        gamma = args.gamma if args.gamma == "scale" else float(args.gamma)
        model = clf.train_svm(X, y, C=args.C, gamma=gamma,
                              class_weight=class_weight, tol=args.tol,
                              cache_mb=args.cache_mb)
        clf.save_svm(model, args.out)
        for pair in model.pairs:
            print(f"  {pair.positive.value} vs {pair.negative.value}: "
                  f"{len(pair.dual_coef)} support vectors, "
                  f"{pair.iterations} iterations")
    else:
        model = clf.train_forest(X, y, n_estimators=args.n_estimators,
                                 class_weight=class_weight, seed=args.seed)
        clf.save_forest(model, args.out)
    print(f"saved {args.out}")
    return 0


def _cmd_grid_search(args) -> int:
    recordings = _select_subset(args.data, args.subset)
    X, y = _features_and_labels(recordings)
    grid = None
    if args.model == "forest":
        grid = [{"model": "forest", "n_estimators": n, "class_weight": w}
                for n in (50, 100) for w in ("balanced", None)]
    report = clf.grid_search(X, y, grid=grid, folds=args.folds, seed=args.seed)
    table = report.to_table()
    print(table)
    print(f"best: {report.best_params} "
          f"(mean accuracy {report.means[report.best_index]:.4f})")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table + "\n")
        print(f"wrote {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    recordings = _select_subset(args.data, args.subset)
    forecaster_path, classifier_path = _model_paths(args)
    forecast_model = fc.load_forecaster(forecaster_path)
    action_model = _load_action_model(classifier_path)
    cm, rep, _ = pl.evaluate_recordings(
        forecast_model, action_model, recordings,
        compare_at_forecast_time=args.compare_at_forecast_time)
    samples = windows.windows_from_recordings(
        recordings, in_len=forecast_model.in_len, out_len=forecast_model.out_len)
    rmse = mx.rmse_report(forecast_model, samples) if samples else None
    print(cm.format_table())
    print()
    print(rep.format_table())
    if rmse is not None:
        print(f"\nforecast rmse: {rmse:.4f}")
    summary = mx.run_summary(cm, rep, forecast_rmse_value=rmse,
                             n_recordings=len(recordings))
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(summary, fh, sort_keys=True, indent=2)
            fh.write("\n")
        print(f"wrote {args.json_out}")
    return 0


def _cmd_oracle_tables(args) -> int:
    for name, cm in mx.reference_matrices().items():
        rep = mx.report(cm)
        print(f"== {name} ({cm.total} frames)")
        print(cm.format_table())
        print(rep.format_table())
        print(f"accuracy: {rep.accuracy * 100:.1f}%")
        print()
    return 0


def _cmd_serve(args) -> int:
    forecaster_path, classifier_path = _model_paths(args)
    forecast_model = fc.load_forecaster(forecaster_path)
    action_model = _load_action_model(classifier_path)
    if args.stdio:
        service.serve_stdio(forecast_model, action_model,
                            sys.stdin.buffer, sys.stdout.buffer)
        return 0
    print(f"serving on {args.host}:{args.port}", file=sys.stderr)
    service.serve(forecast_model, action_model, host=args.host, port=args.port)
    return 0


def _cmd_predict(args) -> int:
    forecaster_path, classifier_path = _model_paths(args)
    forecast_model = fc.load_forecaster(forecaster_path)
    action_model = _load_action_model(classifier_path)
    recordings = read_recordings(args.recording)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for recording in recordings:
            decisions, _ = pl.run_recording(forecast_model, action_model,
                                            recording)
            for decision in decisions:
                out.write(pl.decision_log_line(decision) + "\n")
    finally:
        if args.out:
            out.close()
    return 0


def _cmd_merge_labels(args) -> int:
    recordings = read_recordings(args.recording)
    with open(args.labels, "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    by_session = sidecar if isinstance(sidecar, dict) and "labels" not in sidecar \
        else {recordings[0].session_id: sidecar}
    merged = []
    for recording in recordings:
        entry = by_session.get(recording.session_id)
        if entry is None:
            raise InvariantViolation("no labels for session",
                                     session_id=recording.session_id)
        labels = entry["labels"] if isinstance(entry, dict) else entry
        if len(labels) != len(recording.frames):
            raise InvariantViolation(
                f"{len(labels)} labels for {len(recording.frames)} frames",
                session_id=recording.session_id)
        merged.append(Recording(
            session_id=recording.session_id,
            frames=recording.frames,
            labels=tuple(parse_label(value) for value in labels),
            metadata=recording.metadata,
        ))
    from .frames import write_recording_file
    write_recording_file(merged, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_validate(args) -> int:
    path = args.path
    if os.path.isdir(path):
        files = sorted(f for f in os.listdir(path) if f.endswith(".rec.jsonl"))
        files = [os.path.join(path, f) for f in files]
    else:
        files = [path]
    total = 0
    for file_path in files:
        recordings = read_recording_file(file_path)
        frames = sum(len(r) for r in recordings)
        total += frames
        print(f"ok {file_path}: {len(recordings)} recording(s), {frames} frames")
    print(f"validated {total} frames")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greetcue",
        description="Train and run the conversation-opening timing pipeline.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic labeled dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("split", help="assign recordings to train/test")
    p.add_argument("--data", required=True)
    p.add_argument("--test-fraction", type=float, default=0.109)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("train-forecaster", help="train the pose forecaster")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--subset", choices=("train", "test", "all"), default="train")
    p.add_argument("--epochs", type=int, default=40,
                   help="desk-scale default; pass 200 for a full run")
    p.add_argument("--batch-size", type=int, default=30)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--cell", choices=fc.CELL_KINDS, default="tanh")
    p.add_argument("--in-len", type=int, default=10)
    p.add_argument("--out-len", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train_forecaster)

    p = sub.add_parser("train-classifier", help="train the action classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--subset", choices=("train", "test", "all"), default="train")
    p.add_argument("--model", choices=("svm", "forest"), default="svm")
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--gamma", default="scale")
    p.add_argument("--class-weight", choices=("balanced", "none"),
                   default="balanced")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--cache-mb", type=float, default=256.0)
    p.add_argument("--n-estimators", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train_classifier)

    p = sub.add_parser("grid-search", help="cross-validated hyperparameter search")
    p.add_argument("--data", required=True)
    p.add_argument("--subset", choices=("train", "test", "all"), default="train")
    p.add_argument("--model", choices=("svm", "forest"), default="svm")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_grid_search)

    p = sub.add_parser("evaluate",
                       help="run the timing pipeline over a labeled subset")
    p.add_argument("--data", required=True)
    p.add_argument("--subset", choices=("train", "test", "all"), default="test")
    p.add_argument("--models")
    p.add_argument("--forecaster")
    p.add_argument("--classifier")
    p.add_argument("--json-out")
    p.add_argument("--compare-at-forecast-time", action="store_true",
                   help="score forecast-mode decisions against the label at "
                        "t+5 instead of t")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("oracle-tables",
                       help="recompute metrics from the embedded reference "
                            "confusion matrices")
    p.set_defaults(func=_cmd_oracle_tables)

    p = sub.add_parser("serve", help="run the streaming decision service")
    p.add_argument("--models")
    p.add_argument("--forecaster")
    p.add_argument("--classifier")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=9009)
    p.add_argument("--stdio", action="store_true",
                   help="serve one session over stdin/stdout")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("predict",
                       help="decision log for a single recording file")
    p.add_argument("--models")
    p.add_argument("--forecaster")
    p.add_argument("--classifier")
    p.add_argument("--recording", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("merge-labels",
                       help="attach sidecar labels to an unlabeled recording")
    p.add_argument("--recording", required=True)
    p.add_argument("--labels", required=True,
                   help="JSON sidecar: a label list, {'labels': [...]}, or "
                        "{session: {'labels': [...]}} for multi-session files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_merge_labels)

    p = sub.add_parser("validate", help="validate recording files")
    p.add_argument("path")
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GreetcueError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
