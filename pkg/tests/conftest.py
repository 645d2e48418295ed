from __future__ import annotations

import numpy as np
import pytest

from greetcue.frames import (BLENDSHAPE_SLOTS, BODY_POINTS, FACE_POINTS,
                             HAND_POINTS, ActionLabel, Frame, Recording)


def make_frame(session_id: str = "s0", frame_index: int = 0,
               rng: np.random.Generator | None = None,
               visibility: float = 1.0) -> Frame:
    """A schema-valid frame; random in [0,1] when an rng is given, zeros otherwise."""
    if rng is None:
        body = np.zeros((BODY_POINTS, 4))
        body[:, 3] = visibility
        face = np.zeros((FACE_POINTS, 3))
        hands = np.zeros((HAND_POINTS, 3))
        bs = np.zeros(BLENDSHAPE_SLOTS)
    else:
        body = rng.uniform(0.0, 1.0, size=(BODY_POINTS, 4))
        body[:, 2] = rng.normal(0.0, 0.1, size=BODY_POINTS)
        body[:, 3] = visibility
        face = rng.uniform(0.0, 1.0, size=(FACE_POINTS, 3))
        face[:, 2] = rng.normal(0.0, 0.1, size=FACE_POINTS)
        hands = rng.uniform(0.0, 1.0, size=(HAND_POINTS, 3))
        hands[:, 2] = rng.normal(0.0, 0.1, size=HAND_POINTS)
        bs = rng.uniform(0.0, 1.0, size=BLENDSHAPE_SLOTS)
    return Frame(session_id=session_id, frame_index=frame_index,
                 body=body, face=face, hands=hands, blendshapes=bs)


def make_recording(n_frames: int, session_id: str = "s0",
                   labels: list[ActionLabel] | None = None,
                   seed: int | None = None) -> Recording:
    rng = np.random.default_rng(seed) if seed is not None else None
    frames = tuple(make_frame(session_id, k, rng) for k in range(n_frames))
    return Recording(session_id=session_id, frames=frames,
                     labels=tuple(labels) if labels else None)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
