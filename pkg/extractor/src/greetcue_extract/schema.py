"""Recording file schema constants and record assembly.

This mirrors the greetcue dataset contract (the adapter talks to the primary
toolkit only through files): one JSON object per line with exactly 33 body
landmarks carrying [x, y, z, visibility], 468 face and 42 hand landmarks
carrying [x, y, z], and 53 blendshape scores with slot 0 reserved for the
neutral shape. Estimators that emit 52 scores are padded at slot 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

BODY_POINTS = 33
FACE_POINTS = 468
HAND_POINTS = 42
BLENDSHAPE_SLOTS = 53
FRAME_INTERVAL_MS = 100


@dataclass
class PersonEstimate:
    """Landmarks for one frame; None blocks mean the block was not detected."""

    body: np.ndarray | None = None        # (33, 4) x, y, z, visibility
    face: np.ndarray | None = None        # (468, 3)
    left_hand: np.ndarray | None = None   # (21, 3)
    right_hand: np.ndarray | None = None  # (21, 3)
    blendshapes: np.ndarray | None = None  # (52,) or (53,)


def _block(arr: np.ndarray | None, rows: int, cols: int) -> np.ndarray:
    if arr is None:
        return np.zeros((rows, cols))
    arr = np.asarray(arr, dtype=np.float64)
    if arr.shape != (rows, cols):
        raise ValueError(f"expected shape {(rows, cols)}, got {arr.shape}")
    return arr


def assemble_record(session_id: str, frame_index: int,
                    estimate: PersonEstimate | None) -> dict:
    """Build one schema-conform line record; a None estimate (no person)
    yields all-zero landmarks with zero visibility."""
    estimate = estimate or PersonEstimate()
    body = _block(estimate.body, BODY_POINTS, 4)
    face = _block(estimate.face, FACE_POINTS, 3)
    hands = np.concatenate([_block(estimate.left_hand, 21, 3),
                            _block(estimate.right_hand, 21, 3)])
    bs = estimate.blendshapes
    if bs is None:
        bs = np.zeros(BLENDSHAPE_SLOTS)
    else:
        bs = np.asarray(bs, dtype=np.float64)
        if bs.shape == (BLENDSHAPE_SLOTS - 1,):
            bs = np.concatenate([[0.0], bs])  # pad the neutral slot
        elif bs.shape != (BLENDSHAPE_SLOTS,):
            raise ValueError(f"expected 52 or 53 blendshapes, got {bs.shape}")
    body = body.copy()
    body[:, 0:2] = np.clip(body[:, 0:2], 0.0, 1.0)
    body[:, 3] = np.clip(body[:, 3], 0.0, 1.0)
    face = face.copy()
    face[:, 0:2] = np.clip(face[:, 0:2], 0.0, 1.0)
    hands[:, 0:2] = np.clip(hands[:, 0:2], 0.0, 1.0)
    bs = np.clip(bs, 0.0, 1.0)
    return {
        "session": session_id,
        "i": frame_index,
        "t": frame_index * FRAME_INTERVAL_MS,
        "body": np.round(body, 6).tolist(),
        "face": np.round(face, 6).tolist(),
        "hands": np.round(hands, 6).tolist(),
        "bs": np.round(bs, 6).tolist(),
    }


def record_to_line(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"))
