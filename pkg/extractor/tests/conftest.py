from __future__ import annotations

import cv2
import numpy as np
import pytest


def write_clip(path: str, seconds: float = 5.0, fps: float = 30.0,
               size: tuple[int, int] = (96, 128), person: bool = True) -> str:
    """Synthesize a small test clip: a bright person-ish figure walking
    across a dark room (or an empty room when person=False)."""
    w, h = size
    writer = cv2.VideoWriter(path, cv2.VideoWriter_fourcc(*"mp4v"), fps,
                             (w, h))
    assert writer.isOpened(), "VideoWriter failed to open"
    n = int(seconds * fps)
    for k in range(n):
        img = np.full((h, w, 3), 18, np.uint8)
        if person:
            cx = int(w * (0.2 + 0.6 * k / n))
            cv2.ellipse(img, (cx, int(h * 0.62)), (12, 34), 0, 0, 360,
                        (210, 205, 200), -1)
            cv2.circle(img, (cx, int(h * 0.22)), 9, (220, 215, 210), -1)
        writer.write(img)
    writer.release()
    return path


@pytest.fixture(scope="session")
def person_clip(tmp_path_factory):
    root = tmp_path_factory.mktemp("clips")
    return write_clip(str(root / "person.mp4"), person=True)


@pytest.fixture(scope="session")
def empty_clip(tmp_path_factory):
    root = tmp_path_factory.mktemp("clips-empty")
    return write_clip(str(root / "empty.mp4"), person=False)
