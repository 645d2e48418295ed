"""Streaming decision service: newline-delimited JSON over a stream socket.

One session per connection. Messages:

    -> {"type":"start","session":str,"format":"frame"|"features"}
    -> {"type":"frame", ...frame fields...}            (raw-frame sessions)
    -> {"type":"frame","i":int,"features":[d floats]}  (pre-featurized)
    -> {"type":"end"}
    <- {"type":"started","session":str}
    <- {"type":"decision","i":...,"action":...,"mode":...,"votes":?,"dispatch":...}
    <- {"type":"error","code":str,"message":str}
    <- {"type":"bye","frames":int}

Malformed messages get an error reply and the session continues; a model or
feature dimension mismatch is session-fatal. Frames are processed strictly in
arrival order on the connection's own thread, so decisions come back in
order, one per frame, regardless of how fast the client sends. Each side of
a connection owns an independent pipeline state; only the (read-only) models
are shared.
"""

from __future__ import annotations

import json
import logging
import socket
import socketserver
import threading
import time
from dataclasses import dataclass
from typing import IO

import numpy as np

from .errors import DimensionMismatch, GreetcueError, InvariantViolation
from .forecaster import ForecastModel
from .frames import Frame
from .pipeline import ActionModel, PipelineState, dispatch, timing_step

log = logging.getLogger(__name__)

#: Per-frame soft deadline at the nominal 10 fps input rate.
FRAME_BUDGET_MS = 100.0


def _error(code: str, message: str) -> dict:
    return {"type": "error", "code": code, "message": message}


@dataclass
class SessionStats:
    frames: int = 0
    max_latency_ms: float = 0.0
    deadline_misses: int = 0


class SessionHandler:
    """Protocol state machine for one connection; transport-agnostic."""

    def __init__(self, forecast_model: ForecastModel, action_model: ActionModel):
        self.forecast_model = forecast_model
        self.action_model = action_model
        self.state: PipelineState | None = None
        self.format = "frame"
        self.stats = SessionStats()
        self.closed = False

    def process_line(self, line: str) -> list[dict]:
        line = line.strip()
        if not line:
            return []
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            return [_error("bad_json", "message is not valid JSON")]
        if not isinstance(msg, dict) or "type" not in msg:
            return [_error("bad_type", "message must be an object with a type")]
        kind = msg["type"]
        if kind == "start":
            return self._on_start(msg)
        if kind == "frame":
            return self._on_frame(msg)
        if kind == "end":
            self.closed = True
            return [{"type": "bye", "frames": self.stats.frames}]
        return [_error("bad_type", f"unknown message type {kind!r}")]

    def _on_start(self, msg: dict) -> list[dict]:
        session = msg.get("session")
        fmt = msg.get("format", "frame")
        if not isinstance(session, str) or fmt not in ("frame", "features"):
            return [_error("bad_start", "start needs a session id and a "
                           "format of 'frame' or 'features'")]
        try:
            self.state = PipelineState(forecast_model=self.forecast_model,
                                       action_model=self.action_model,
                                       session_id=session)
        except DimensionMismatch as exc:
            # mismatched models cannot serve any frame: session-fatal
            self.closed = True
            return [_error("bad_dim", str(exc))]
        self.format = fmt
        return [{"type": "started", "session": session}]

    def _on_frame(self, msg: dict) -> list[dict]:
        if self.state is None:
            return [_error("no_session", "send a start message first")]
        t0 = time.perf_counter()
        try:
            if self.format == "features":
                features = msg.get("features")
                if not isinstance(features, list) or len(features) != \
                        self.forecast_model.feature_dim:
                    got = len(features) if isinstance(features, list) else None
                    return [_error("bad_dim",
                                   f"expected {self.forecast_model.feature_dim} "
                                   f"features, got {got}")]
                decision = self.state.step_features(
                    np.asarray(features, dtype=np.float64), int(msg["i"]))
            else:
                frame = Frame(
                    session_id=self.state.session_id,
                    frame_index=int(msg["i"]),
                    body=np.asarray(msg["body"], dtype=np.float64),
                    face=np.asarray(msg["face"], dtype=np.float64),
                    hands=np.asarray(msg["hands"], dtype=np.float64),
                    blendshapes=np.asarray(msg["bs"], dtype=np.float64),
                    timestamp_ms=msg.get("t", -1),
                )
                decision = timing_step(self.state, frame)
        except (KeyError, TypeError, ValueError) as exc:
            return [_error("bad_frame", f"malformed frame message: {exc}")]
        except DimensionMismatch as exc:
            self.closed = True
            return [_error("bad_dim", str(exc))]
        except (InvariantViolation, GreetcueError) as exc:
            return [_error("bad_frame", str(exc))]
        dispatch(decision)
        latency_ms = (time.perf_counter() - t0) * 1e3
        self.stats.frames += 1
        self.stats.max_latency_ms = max(self.stats.max_latency_ms, latency_ms)
        if latency_ms > FRAME_BUDGET_MS:
            self.stats.deadline_misses += 1
            log.warning("frame %d decided in %.1f ms (budget %.0f ms)",
                        decision.frame_index, latency_ms, FRAME_BUDGET_MS)
        reply = {"type": "decision"}
        reply.update(decision.record())
        return [reply]


def _pump(handler: SessionHandler, rfile: IO[bytes], wfile: IO[bytes]) -> None:
    for raw in rfile:
        try:
            line = raw.decode("utf-8")
        except UnicodeDecodeError:
            line = ""
        for reply in handler.process_line(line):
            wfile.write((json.dumps(reply, separators=(",", ":")) + "\n")
                        .encode("utf-8"))
        wfile.flush()
        if handler.closed:
            break


class DecisionServer(socketserver.ThreadingTCPServer):
    """One handler thread per connection; models shared read-only."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], forecast_model: ForecastModel,
                 action_model: ActionModel):
        self.forecast_model = forecast_model
        self.action_model = action_model
        super().__init__(address, _TcpHandler)

    @property
    def port(self) -> int:
        return self.server_address[1]


class _TcpHandler(socketserver.StreamRequestHandler):
    def handle(self):
        server: DecisionServer = self.server  # type: ignore[assignment]
        handler = SessionHandler(server.forecast_model, server.action_model)
        log.info("connection from %s", self.client_address)
        try:
            _pump(handler, self.rfile, self.wfile)
        except (ConnectionError, BrokenPipeError):
            pass
        log.info("session done: %d frames, max latency %.1f ms, %d misses",
                 handler.stats.frames, handler.stats.max_latency_ms,
                 handler.stats.deadline_misses)


def serve(forecast_model: ForecastModel, action_model: ActionModel,
          host: str = "127.0.0.1", port: int = 0,
          ready: threading.Event | None = None) -> None:
    """Run the TCP service until interrupted. port 0 picks a free port;
    the chosen address is logged and ``ready`` (if given) is set once
    listening."""
    with DecisionServer((host, port), forecast_model, action_model) as server:
        log.info("listening on %s:%d", host, server.port)
        if ready is not None:
            ready.set()
        server.serve_forever()


def serve_stdio(forecast_model: ForecastModel, action_model: ActionModel,
                rfile: IO[bytes], wfile: IO[bytes]) -> None:
    """Single-session stdin/stdout transport (used by tests and pipelines)."""
    handler = SessionHandler(forecast_model, action_model)
    _pump(handler, rfile, wfile)


class ServiceClient:
    """Minimal blocking client for the newline-delimited JSON protocol."""

    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.rfile = self.sock.makefile("rb")

    def send(self, msg: dict) -> None:
        self.sock.sendall((json.dumps(msg, separators=(",", ":")) + "\n")
                          .encode("utf-8"))

    def recv(self) -> dict:
        line = self.rfile.readline()
        if not line:
            raise ConnectionError("server closed the connection")
        return json.loads(line.decode("utf-8"))

    def close(self) -> None:
        try:
            self.rfile.close()
        finally:
            self.sock.close()
