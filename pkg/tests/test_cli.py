from __future__ import annotations

import filecmp
import json
import os

import numpy as np
import pytest

from greetcue.cli import main
from greetcue.forecaster import load_forecaster
from greetcue.frames import read_manifest, read_recordings

pytestmark = pytest.mark.cli


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    """A small simulated dataset with split + trained models, shared across
    CLI tests (desk-scale settings keep this under a minute)."""
    root = tmp_path_factory.mktemp("cliwork")
    data = str(root / "data")
    models = str(root / "models")
    assert main(["simulate", "--n", "24", "--seed", "5", "--out", data]) == 0
    assert main(["split", "--data", data, "--test-fraction", "0.2",
                 "--seed", "5"]) == 0
    assert main(["train-forecaster", "--data", data,
                 "--out", os.path.join(models, "forecaster.npz"),
                 "--epochs", "3", "--hidden", "16", "--seed", "5"]) == 0
    assert main(["train-classifier", "--data", data,
                 "--out", os.path.join(models, "classifier.npz"),
                 "--model", "svm", "--seed", "5"]) == 0
    return data, models


class TestSimulate:
    def test_byte_identical_datasets(self, tmp_path):
        a, b = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(["simulate", "--n", "10", "--seed", "1", "--out", a]) == 0
        assert main(["simulate", "--n", "10", "--seed", "1", "--out", b]) == 0
        names = sorted(os.listdir(a))
        assert names == sorted(os.listdir(b))
        for name in names:
            assert filecmp.cmp(os.path.join(a, name), os.path.join(b, name),
                               shallow=False), name


class TestSplit:
    def test_manifest_gains_split(self, tiny_dataset):
        data, _ = tiny_dataset
        manifest = read_manifest(data)
        splits = {e["split"] for e in manifest["sessions"]}
        assert splits == {"train", "test"}


class TestTraining:
    def test_forecaster_artifact_loads(self, tiny_dataset):
        data, models = tiny_dataset
        model = load_forecaster(os.path.join(models, "forecaster.npz"))
        assert model.feature_dim == 1682
        assert len(model.training_log) == 3


class TestEvaluate:
    def test_json_matches_independent_aggregation(self, tiny_dataset, tmp_path):
        data, models = tiny_dataset
        out = str(tmp_path / "metrics.json")
        assert main(["evaluate", "--data", data, "--models", models,
                     "--json-out", out]) == 0
        blob = json.load(open(out))
        # cross-module oracle: recompute with the library directly
        from greetcue import pipeline as pl
        from greetcue.cli import _load_action_model
        recordings = [r for r in read_recordings(data)
                      if _split_of(data)[r.session_id] == "test"]
        fc = load_forecaster(os.path.join(models, "forecaster.npz"))
        ac = _load_action_model(os.path.join(models, "classifier.npz"))
        cm, rep, _ = pl.evaluate_recordings(fc, ac, recordings)
        assert blob["classification"]["accuracy"] == rep.accuracy
        assert blob["confusion"]["counts"] == cm.counts.tolist()
        assert blob["n_recordings"] == len(recordings)
        assert "forecast_rmse" in blob

    def test_deterministic_json(self, tiny_dataset, tmp_path):
        data, models = tiny_dataset
        a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        main(["evaluate", "--data", data, "--models", models, "--json-out", a])
        main(["evaluate", "--data", data, "--models", models, "--json-out", b])
        assert open(a).read() == open(b).read()


def _split_of(data):
    return {e["id"]: e["split"] for e in read_manifest(data)["sessions"]}


class TestOracleTables:
    def test_prints_both_reference_accuracies(self, capsys):
        assert main(["oracle-tables"]) == 0
        out = capsys.readouterr().out
        assert "75.3%" in out
        assert "73.6%" in out
        assert "action_classifier" in out
        assert "timing_classifier" in out


class TestPredict:
    def test_decision_log_written(self, tiny_dataset, tmp_path):
        data, models = tiny_dataset
        manifest = read_manifest(data)
        rec_file = os.path.join(data, manifest["sessions"][0]["file"])
        out = str(tmp_path / "log.jsonl")
        assert main(["predict", "--models", models, "--recording", rec_file,
                     "--out", out]) == 0
        lines = [json.loads(ln) for ln in open(out)]
        n_frames = manifest["sessions"][0]["frames"]
        assert len(lines) == n_frames
        assert lines[0]["i"] == 0
        assert all("action" in ln and "dispatch" in ln for ln in lines)


class TestValidate:
    def test_validate_dataset(self, tiny_dataset, capsys):
        data, _ = tiny_dataset
        assert main(["validate", data]) == 0
        assert "validated" in capsys.readouterr().out

    def test_validate_rejects_corrupt_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.rec.jsonl"
        bad.write_text('{"session":"x","i":0}\n')
        assert main(["validate", str(bad)]) == 1
        assert "error[" in capsys.readouterr().err


class TestMergeLabels:
    def test_sidecar_labels_attached(self, tmp_path):
        from greetcue.frames import write_recordings

        from .conftest import make_recording
        rec = make_recording(4, session_id="raw", seed=1)
        rec_path = tmp_path / "raw.rec.jsonl"
        write_recordings([rec], rec_path)
        sidecar = tmp_path / "labels.json"
        sidecar.write_text(json.dumps({"labels": ["wait", "wait", "speak",
                                                  "speak"]}))
        out = tmp_path / "labeled.rec.jsonl"
        assert main(["merge-labels", "--recording", str(rec_path),
                     "--labels", str(sidecar), "--out", str(out)]) == 0
        back = read_recordings(out)[0]
        assert [lab.value for lab in back.labels] == ["wait", "wait",
                                                      "speak", "speak"]

    def test_length_mismatch_rejected(self, tmp_path, capsys):
        from greetcue.frames import write_recordings

        from .conftest import make_recording
        rec = make_recording(3, session_id="raw2", seed=2)
        rec_path = tmp_path / "raw2.rec.jsonl"
        write_recordings([rec], rec_path)
        sidecar = tmp_path / "labels.json"
        sidecar.write_text(json.dumps(["wait"]))
        assert main(["merge-labels", "--recording", str(rec_path),
                     "--labels", str(sidecar),
                     "--out", str(tmp_path / "x.jsonl")]) == 1
        assert "error[" in capsys.readouterr().err


class TestErrors:
    def test_unknown_subcommand_usage_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_missing_dataset_is_categorized(self, capsys, tmp_path):
        missing = str(tmp_path / "nope")
        assert main(["split", "--data", missing, "--seed", "1"]) == 1
        assert "error[" in capsys.readouterr().err

    def test_train_without_split_hints_at_split(self, tmp_path, capsys):
        data = str(tmp_path / "nosplit")
        main(["simulate", "--n", "10", "--seed", "2", "--out", data])
        code = main(["train-forecaster", "--data", data,
                     "--out", str(tmp_path / "f.npz"), "--epochs", "1",
                     "--hidden", "4"])
        assert code == 1
        assert "split" in capsys.readouterr().err
