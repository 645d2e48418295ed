from __future__ import annotations

import json
import threading
import time

import pytest

from greetcue.frames import FEATURE_LENGTH, ActionLabel, frame_to_record
from greetcue.pipeline import decision_log_line, run_recording
from greetcue.service import (DecisionServer, ServiceClient, SessionHandler,
                              serve_stdio)

from .conftest import make_recording
from .test_pipeline import StubClassifier, StubForecaster

W, S, L = ActionLabel.WAIT, ActionLabel.SPEAK, ActionLabel.LISTEN


def models(label=S):
    return StubForecaster(), StubClassifier(lambda x: label)


def frame_message(frame) -> dict:
    rec = frame_to_record(frame)
    rec.pop("session")
    rec.pop("label", None)
    return {"type": "frame", **rec}


@pytest.fixture
def server():
    fc, ac = models()
    srv = DecisionServer(("127.0.0.1", 0), fc, ac)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv
    srv.shutdown()
    srv.server_close()


class TestSessionHandler:
    def test_start_then_warmup_decisions(self):
        handler = SessionHandler(*models())
        assert handler.process_line(
            '{"type":"start","session":"a","format":"frame"}'
        )[0]["type"] == "started"
        rec = make_recording(9, seed=1)
        for frame in rec.frames:
            replies = handler.process_line(json.dumps(frame_message(frame)))
            assert replies[0]["type"] == "decision"
            assert replies[0]["mode"] == "warmup"
        assert handler.stats.frames == 9

    def test_forecast_mode_has_five_votes(self):
        handler = SessionHandler(*models())
        handler.process_line('{"type":"start","session":"a","format":"frame"}')
        rec = make_recording(12, seed=2)
        replies = [handler.process_line(json.dumps(frame_message(f)))[0]
                   for f in rec.frames]
        assert replies[10]["mode"] == "forecast"
        assert len(replies[10]["votes"]) == 5
        assert replies[11]["mode"] == "forecast"

    def test_bad_json_keeps_session_alive(self):
        handler = SessionHandler(*models())
        handler.process_line('{"type":"start","session":"a","format":"features"}')
        assert handler.process_line("{oops")[0]["code"] == "bad_json"
        reply = handler.process_line(json.dumps(
            {"type": "frame", "i": 0, "features": [0.0] * FEATURE_LENGTH}))
        assert reply[0]["type"] == "decision"

    def test_wrong_feature_count_is_bad_dim_then_recovers(self):
        handler = SessionHandler(*models())
        handler.process_line('{"type":"start","session":"a","format":"features"}')
        reply = handler.process_line(json.dumps(
            {"type": "frame", "i": 0, "features": [0.0] * (FEATURE_LENGTH - 1)}))
        assert reply[0] == {"type": "error", "code": "bad_dim",
                            "message": reply[0]["message"]}
        ok = handler.process_line(json.dumps(
            {"type": "frame", "i": 0, "features": [0.0] * FEATURE_LENGTH}))
        assert ok[0]["type"] == "decision"
        assert not handler.closed

    def test_mismatched_models_fatal_at_start(self):
        fc = StubForecaster()
        ac = StubClassifier(lambda x: W, feature_dim=10)
        handler = SessionHandler(fc, ac)
        reply = handler.process_line('{"type":"start","session":"a"}')
        assert reply[0]["code"] == "bad_dim"
        assert handler.closed

    def test_frame_before_start(self):
        handler = SessionHandler(*models())
        reply = handler.process_line('{"type":"frame","i":0}')
        assert reply[0]["code"] == "no_session"

    def test_end_returns_bye(self):
        handler = SessionHandler(*models())
        handler.process_line('{"type":"start","session":"a"}')
        reply = handler.process_line('{"type":"end"}')
        assert reply[0] == {"type": "bye", "frames": 0}
        assert handler.closed


class TestWireOfflineEquivalence:
    def test_decision_log_byte_for_byte(self, server):
        fc, ac = models()
        rec = make_recording(17, labels=[S] * 17, seed=3)
        offline, _ = run_recording(fc, ac, rec)
        offline_lines = [decision_log_line(d) for d in offline]

        client = ServiceClient("127.0.0.1", server.port)
        client.send({"type": "start", "session": rec.session_id,
                     "format": "frame"})
        assert client.recv()["type"] == "started"
        wire_lines = []
        latencies = []
        for frame in rec.frames:
            t0 = time.perf_counter()
            client.send(frame_message(frame))
            reply = client.recv()
            latencies.append(time.perf_counter() - t0)
            assert reply["type"] == "decision"
            reply.pop("type")
            wire_lines.append(json.dumps(reply, separators=(",", ":")))
        client.send({"type": "end"})
        assert client.recv()["type"] == "bye"
        client.close()
        assert wire_lines == offline_lines
        assert max(latencies) < 0.1  # per-frame round trip under the budget

    def test_featurized_payload_equivalent(self, server):
        fc, ac = models()
        rec = make_recording(13, seed=4)
        offline, _ = run_recording(fc, ac, rec)
        client = ServiceClient("127.0.0.1", server.port)
        client.send({"type": "start", "session": "feat", "format": "features"})
        client.recv()
        features = rec.feature_matrix()
        wire = []
        for k, row in enumerate(features):
            client.send({"type": "frame", "i": k, "features": row.tolist()})
            wire.append(client.recv())
        client.close()
        assert [w["action"] for w in wire] == [d.action.value for d in offline]
        assert [w["mode"] for w in wire] == [d.mode for d in offline]


class TestConcurrency:
    def test_interleaved_sessions_stay_isolated(self, server):
        fc, ac = models()
        rec_a = make_recording(14, session_id="a", seed=5)
        rec_b = make_recording(14, session_id="b", seed=6)
        expect_a, _ = run_recording(fc, ac, rec_a)
        expect_b, _ = run_recording(fc, ac, rec_b)

        ca = ServiceClient("127.0.0.1", server.port)
        cb = ServiceClient("127.0.0.1", server.port)
        ca.send({"type": "start", "session": "a", "format": "frame"})
        cb.send({"type": "start", "session": "b", "format": "frame"})
        ca.recv(), cb.recv()
        got_a, got_b = [], []
        for fa, fb in zip(rec_a.frames, rec_b.frames):
            ca.send(frame_message(fa))
            cb.send(frame_message(fb))
            got_a.append(ca.recv())
            got_b.append(cb.recv())
        ca.close(), cb.close()
        assert [g["i"] for g in got_a] == [d.frame_index for d in expect_a]
        assert [g["mode"] for g in got_a] == [d.mode for d in expect_a]
        assert [g["mode"] for g in got_b] == [d.mode for d in expect_b]

    def test_backpressure_ordered_replies_none_dropped(self, server):
        rec = make_recording(30, seed=7)
        client = ServiceClient("127.0.0.1", server.port)
        client.send({"type": "start", "session": "burst", "format": "frame"})
        client.recv()
        # fire everything without reading, then drain
        for frame in rec.frames:
            client.send(frame_message(frame))
        replies = [client.recv() for _ in rec.frames]
        client.close()
        assert [r["i"] for r in replies] == list(range(30))
        assert all(r["type"] == "decision" for r in replies)


class TestStdio:
    def test_single_session_over_pipes(self, tmp_path):
        import io
        fc, ac = models()
        rec = make_recording(12, seed=8)
        lines = ['{"type":"start","session":"s","format":"frame"}']
        lines += [json.dumps(frame_message(f)) for f in rec.frames]
        lines += ['{"type":"end"}']
        stdin = io.BytesIO(("\n".join(lines) + "\n").encode())
        stdout = io.BytesIO()
        serve_stdio(fc, ac, stdin, stdout)
        replies = [json.loads(ln) for ln in
                   stdout.getvalue().decode().splitlines()]
        assert replies[0]["type"] == "started"
        assert replies[-1]["type"] == "bye"
        decisions = [r for r in replies if r["type"] == "decision"]
        assert len(decisions) == 12
