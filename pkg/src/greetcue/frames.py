"""Domain types for landmark frames and recordings, featurization, and file I/O.

A frame is one 10 fps snapshot of 543 tracked landmarks (33 body, 468 face,
2x21 hands) plus 53 facial blendshape scores. Featurization flattens a frame
into the fixed 1682-value vector consumed by every model in the toolkit:

    [0..98]      body x,y,z (33x3), zeroed where visibility < threshold
    [99..1502]   face x,y,z (468x3)
    [1503..1628] hand x,y,z (42x3, left then right)
    [1629..1681] blendshape scores (53, slot 0 = neutral)

Visibility is used only to gate body coordinates; it never appears in the
output vector.
"""

from __future__ import annotations

import enum
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvariantViolation, RecordingParseError, SchemaError

BODY_POINTS = 33
FACE_POINTS = 468
HAND_POINTS = 42  # 2 hands x 21 points, left then right
BLENDSHAPE_SLOTS = 53  # slot 0 is reserved for the neutral score

BODY_BLOCK = slice(0, BODY_POINTS * 3)
FACE_BLOCK = slice(BODY_POINTS * 3, (BODY_POINTS + FACE_POINTS) * 3)
HAND_BLOCK = slice((BODY_POINTS + FACE_POINTS) * 3,
                   (BODY_POINTS + FACE_POINTS + HAND_POINTS) * 3)
BLENDSHAPE_BLOCK = slice((BODY_POINTS + FACE_POINTS + HAND_POINTS) * 3,
                         (BODY_POINTS + FACE_POINTS + HAND_POINTS) * 3
                         + BLENDSHAPE_SLOTS)

FEATURE_LENGTH = (BODY_POINTS + FACE_POINTS + HAND_POINTS) * 3 + BLENDSHAPE_SLOTS
assert FEATURE_LENGTH == 1682

FRAME_INTERVAL_MS = 100  # nominal spacing at 10 fps

DEFAULT_VISIBILITY_THRESHOLD = 0.5

RECORDING_SUFFIX = ".rec.jsonl"
MANIFEST_NAME = "manifest.json"


class ActionLabel(str, enum.Enum):
    """The three robot actions: wait (no decision yet), speak (robot opens),
    listen (the user will open, switch to listening)."""

    WAIT = "wait"
    SPEAK = "speak"
    LISTEN = "listen"

    def __str__(self) -> str:  # json-friendly
        return self.value


#: Canonical class order, which is also the tie-break priority: missing a
#: user utterance is the costliest failure, so listen outranks speak, and
#: speak outranks wait.
LABEL_ORDER = (ActionLabel.LISTEN, ActionLabel.SPEAK, ActionLabel.WAIT)


def parse_label(value: str) -> ActionLabel:
    try:
        return ActionLabel(value)
    except ValueError:
        raise InvariantViolation(f"unknown action label {value!r}") from None


@dataclass(frozen=True)
class Landmark:
    """A tracked keypoint: normalized x, y in [0,1], depth z relative to the
    hip center, and a visibility probability (fixed 0 for face/hand points)."""

    x: float
    y: float
    z: float
    visibility: float = 0.0


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


def _check_block(name: str, arr: np.ndarray, rows: int, cols: int) -> None:
    if arr.shape != (rows, cols):
        raise SchemaError(name, f"expected shape {(rows, cols)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(name, "contains non-finite values")


@dataclass(frozen=True)
class Frame:
    """One snapshot of a session. Immutable after construction.

    body is (33, 4) rows of [x, y, z, visibility]; face (468, 3) and hands
    (42, 3) carry coordinates only; blendshapes is a length-53 vector of
    scores in [0, 1].
    """

    session_id: str
    frame_index: int
    body: np.ndarray
    face: np.ndarray
    hands: np.ndarray
    blendshapes: np.ndarray
    timestamp_ms: int = -1

    def __post_init__(self):
        if self.frame_index < 0:
            raise SchemaError("frame_index", f"must be >= 0, got {self.frame_index}")
        body = np.asarray(self.body, dtype=np.float64)
        if body.shape != (BODY_POINTS, 4):
            raise SchemaError("body", f"expected shape {(BODY_POINTS, 4)}, got {body.shape}")
        if not np.all(np.isfinite(body)):
            raise SchemaError("body", "contains non-finite values")
        face = np.asarray(self.face, dtype=np.float64)
        _check_block("face", face, FACE_POINTS, 3)
        hands = np.asarray(self.hands, dtype=np.float64)
        _check_block("hands", hands, HAND_POINTS, 3)
        bs = np.asarray(self.blendshapes, dtype=np.float64)
        if bs.shape != (BLENDSHAPE_SLOTS,):
            raise SchemaError("blendshapes",
                              f"expected {BLENDSHAPE_SLOTS} scores, got shape {bs.shape}")
        for name, xy in (("body", body[:, 0:2]), ("face", face[:, 0:2]),
                         ("hands", hands[:, 0:2])):
            if xy.size and (xy.min() < 0.0 or xy.max() > 1.0):
                raise SchemaError(name, "x/y coordinates must lie in [0, 1]")
        vis = body[:, 3]
        if vis.min() < 0.0 or vis.max() > 1.0:
            raise SchemaError("body", "visibility must lie in [0, 1]")
        if bs.size and (bs.min() < 0.0 or bs.max() > 1.0 or not np.all(np.isfinite(bs))):
            raise SchemaError("blendshapes", "scores must lie in [0, 1]")
        object.__setattr__(self, "body", _as_readonly(body))
        object.__setattr__(self, "face", _as_readonly(face))
        object.__setattr__(self, "hands", _as_readonly(hands))
        object.__setattr__(self, "blendshapes", _as_readonly(bs))
        if self.timestamp_ms < 0:
            object.__setattr__(self, "timestamp_ms",
                               self.frame_index * FRAME_INTERVAL_MS)

    def body_landmarks(self) -> list[Landmark]:
        return [Landmark(*row) for row in self.body]


def zero_frame(session_id: str, frame_index: int) -> Frame:
    """All-zero frame (absent person convention: zero coords, zero visibility)."""
    return Frame(
        session_id=session_id,
        frame_index=frame_index,
        body=np.zeros((BODY_POINTS, 4)),
        face=np.zeros((FACE_POINTS, 3)),
        hands=np.zeros((HAND_POINTS, 3)),
        blendshapes=np.zeros(BLENDSHAPE_SLOTS),
    )


def featurize(frame: Frame,
              visibility_threshold: float = DEFAULT_VISIBILITY_THRESHOLD) -> np.ndarray:
    """Flatten a frame into the canonical 1682-value feature vector.

    Body landmark i contributes (0, 0, 0) at positions [3i..3i+2] when its
    visibility is below the threshold. Face and hand coordinates are passed
    through ungated. Pure function: identical frames yield identical vectors.
    """
    if not 0.0 <= visibility_threshold <= 1.0:
        raise ValueError(f"visibility_threshold must lie in [0, 1], "
                         f"got {visibility_threshold}")
    body = np.array(frame.body[:, 0:3])
    body[frame.body[:, 3] < visibility_threshold] = 0.0
    out = np.concatenate([
        body.ravel(),
        frame.face.ravel(),
        frame.hands.ravel(),
        frame.blendshapes,
    ])
    assert out.shape == (FEATURE_LENGTH,)
    return out


def feature_bounds(dim: int = FEATURE_LENGTH) -> tuple[np.ndarray, np.ndarray] | None:
    """Valid-range clamp bounds for the canonical layout, or None for other dims.

    x, y and blendshape entries live in [0, 1]; z (every third coordinate
    slot) is unbounded.
    """
    if dim != FEATURE_LENGTH:
        return None
    lo = np.full(dim, -np.inf)
    hi = np.full(dim, np.inf)
    coord_len = (BODY_POINTS + FACE_POINTS + HAND_POINTS) * 3
    idx = np.arange(coord_len)
    xy = idx[idx % 3 != 2]
    lo[xy] = 0.0
    hi[xy] = 1.0
    lo[BLENDSHAPE_BLOCK] = 0.0
    hi[BLENDSHAPE_BLOCK] = 1.0
    return lo, hi


@dataclass(frozen=True)
class Recording:
    """An ordered frame sequence for one interaction session, optionally
    labeled frame-by-frame."""

    session_id: str
    frames: tuple[Frame, ...]
    labels: tuple[ActionLabel, ...] | None = None
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != len(self.frames):
                raise InvariantViolation(
                    f"labels length {len(self.labels)} does not match "
                    f"{len(self.frames)} frames", session_id=self.session_id)
        for pos, frame in enumerate(self.frames):
            if frame.frame_index != pos:
                raise InvariantViolation(
                    f"frame_index must increase from 0 with step 1; "
                    f"expected {pos}, got {frame.frame_index}",
                    session_id=self.session_id, frame_index=frame.frame_index)
            if frame.session_id != self.session_id:
                raise InvariantViolation(
                    f"frame belongs to session {frame.session_id!r}",
                    session_id=self.session_id, frame_index=frame.frame_index)

    def __len__(self) -> int:
        return len(self.frames)

    def feature_matrix(self, visibility_threshold: float = DEFAULT_VISIBILITY_THRESHOLD
                       ) -> np.ndarray:
        """(n_frames, 1682) matrix of featurized frames."""
        if not self.frames:
            return np.zeros((0, FEATURE_LENGTH))
        return np.stack([featurize(f, visibility_threshold) for f in self.frames])

    def label_counts(self) -> dict[ActionLabel, int]:
        counts = {label: 0 for label in LABEL_ORDER}
        for label in self.labels or ():
            counts[label] += 1
        return counts


# ---------------------------------------------------------------------------
# File I/O. One frame per line:
# {"session":s,"i":n,"t":ms,"body":[[x,y,z,v]*33],"face":[[x,y,z]*468],
#  "hands":[[x,y,z]*42],"bs":[53 floats],"label":"wait|speak|listen"?}
# Floats are written with Python's shortest round-trip repr, which preserves
# more than the required 6 significant digits and round-trips bit-exactly.
# ---------------------------------------------------------------------------

def frame_to_record(frame: Frame, label: ActionLabel | None = None) -> dict:
    rec = {
        "session": frame.session_id,
        "i": frame.frame_index,
        "t": frame.timestamp_ms,
        "body": frame.body.tolist(),
        "face": frame.face.tolist(),
        "hands": frame.hands.tolist(),
        "bs": frame.blendshapes.tolist(),
    }
    if label is not None:
        rec["label"] = label.value
    return rec


def _frame_from_record(rec: dict) -> tuple[Frame, ActionLabel | None]:
    frame = Frame(
        session_id=rec["session"],
        frame_index=rec["i"],
        body=np.asarray(rec["body"], dtype=np.float64),
        face=np.asarray(rec["face"], dtype=np.float64),
        hands=np.asarray(rec["hands"], dtype=np.float64),
        blendshapes=np.asarray(rec["bs"], dtype=np.float64),
        timestamp_ms=rec.get("t", -1),
    )
    label = parse_label(rec["label"]) if "label" in rec else None
    return frame, label


def _build_recording(session_id: str, frames: list[Frame],
                     labels: list[ActionLabel | None]) -> Recording:
    has_labels = any(lab is not None for lab in labels)
    if has_labels and not all(lab is not None for lab in labels):
        raise InvariantViolation("labels must be present on all frames or none",
                                 session_id=session_id)
    return Recording(
        session_id=session_id,
        frames=tuple(frames),
        labels=tuple(labels) if has_labels else None,
    )


def read_recording_file(path: str | os.PathLike) -> list[Recording]:
    """Parse one .rec.jsonl file. Frames of a session must be consecutive."""
    path = os.fspath(path)
    recordings: list[Recording] = []
    frames: list[Frame] = []
    labels: list[ActionLabel | None] = []
    current: str | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordingParseError(path, line_no, f"invalid JSON: {exc.msg}")
            try:
                frame, label = _frame_from_record(rec)
            except KeyError as exc:
                raise RecordingParseError(path, line_no, f"missing field {exc}")
            except (SchemaError, InvariantViolation) as exc:
                raise RecordingParseError(path, line_no, str(exc))
            if current is not None and frame.session_id != current:
                recordings.append(_build_recording(current, frames, labels))
                frames, labels = [], []
            current = frame.session_id
            frames.append(frame)
            labels.append(label)
    if current is not None:
        recordings.append(_build_recording(current, frames, labels))
    return recordings


def read_recordings(path: str | os.PathLike) -> list[Recording]:
    """Read recordings from a .rec.jsonl file or a dataset directory.

    Directories are scanned for ``*.rec.jsonl`` files in sorted order.
    An empty file yields an empty list.
    """
    path = os.fspath(path)
    if os.path.isdir(path):
        out: list[Recording] = []
        for name in sorted(os.listdir(path)):
            if name.endswith(RECORDING_SUFFIX):
                out.extend(read_recording_file(os.path.join(path, name)))
        return out
    return read_recording_file(path)


def write_recording_file(recordings: Iterable[Recording],
                         path: str | os.PathLike) -> None:
    path = os.fspath(path)
    with open(path, "w", encoding="utf-8") as fh:
        for recording in recordings:
            labels: Sequence[ActionLabel | None]
            labels = recording.labels or [None] * len(recording.frames)
            for frame, label in zip(recording.frames, labels):
                fh.write(json.dumps(frame_to_record(frame, label),
                                    separators=(",", ":")))
                fh.write("\n")


def write_recordings(recordings: Sequence[Recording],
                     path: str | os.PathLike) -> None:
    """Write recordings to a single file (path ending in .jsonl) or one
    ``<session>.rec.jsonl`` per recording inside a directory."""
    path = os.fspath(path)
    if path.endswith(".jsonl"):
        write_recording_file(recordings, path)
        return
    os.makedirs(path, exist_ok=True)
    for recording in recordings:
        write_recording_file(
            [recording], os.path.join(path, recording.session_id + RECORDING_SUFFIX))


def read_manifest(directory: str | os.PathLike) -> dict:
    with open(os.path.join(os.fspath(directory), MANIFEST_NAME),
              "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_manifest(directory: str | os.PathLike, manifest: dict) -> None:
    with open(os.path.join(os.fspath(directory), MANIFEST_NAME),
              "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def quantize(value: float, digits: int = 6) -> float:
    """Round to ``digits`` significant decimal digits (used by data producers
    to keep on-disk files compact while staying bit-exact on round-trip)."""
    if value == 0.0 or not math.isfinite(value):
        return value
    return float(f"{value:.{digits}g}")
