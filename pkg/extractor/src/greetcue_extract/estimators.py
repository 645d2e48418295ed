"""Landmark estimator backends.

``mediapipe`` wraps the Google MediaPipe holistic solution when the package
is installed. ``blob`` is a dependency-free stand-in for environments without
the real model (CI, this test suite): it finds the dominant foreground region
and projects a fixed skeleton template onto its bounding box. It is not a
pose estimator, just a deterministic source of schema-valid landmarks; frames
without a plausible foreground region count as "no person".
"""

from __future__ import annotations

import numpy as np

from .schema import BLENDSHAPE_SLOTS, BODY_POINTS, FACE_POINTS, PersonEstimate


class EstimatorUnavailable(RuntimeError):
    pass


def _body_template() -> np.ndarray:
    # (x, y) in unit bounding-box coordinates, z relative depth
    t = np.zeros((BODY_POINTS, 3))
    pairs = {
        0: (0.50, 0.06), 1: (0.46, 0.05), 2: (0.44, 0.05), 3: (0.42, 0.05),
        4: (0.54, 0.05), 5: (0.56, 0.05), 6: (0.58, 0.05),
        7: (0.40, 0.07), 8: (0.60, 0.07), 9: (0.47, 0.10), 10: (0.53, 0.10),
        11: (0.35, 0.22), 12: (0.65, 0.22), 13: (0.28, 0.38), 14: (0.72, 0.38),
        15: (0.25, 0.52), 16: (0.75, 0.52), 17: (0.23, 0.56), 18: (0.77, 0.56),
        19: (0.24, 0.58), 20: (0.76, 0.58), 21: (0.26, 0.56), 22: (0.74, 0.56),
        23: (0.40, 0.52), 24: (0.60, 0.52), 25: (0.41, 0.70), 26: (0.59, 0.70),
        27: (0.42, 0.88), 28: (0.58, 0.88), 29: (0.41, 0.93), 30: (0.59, 0.93),
        31: (0.44, 0.97), 32: (0.56, 0.97),
    }
    for k, (x, y) in pairs.items():
        t[k] = (x, y, -0.05 + 0.1 * (y > 0.5))
    return t


def _face_template() -> np.ndarray:
    golden = np.pi * (3.0 - np.sqrt(5.0))
    k = np.arange(FACE_POINTS)
    r = np.sqrt((k + 0.5) / FACE_POINTS)
    theta = k * golden
    t = np.zeros((FACE_POINTS, 3))
    t[:, 0] = 0.5 + 0.10 * r * np.cos(theta)
    t[:, 1] = 0.07 + 0.05 * r * np.sin(theta)
    t[:, 2] = -0.02 * (1.0 - r * r)
    return t


def _hand_template(side: float) -> np.ndarray:
    base_x = 0.25 if side < 0 else 0.75
    t = np.zeros((21, 3))
    for k in range(21):
        finger, joint = divmod(k - 1, 4) if k else (-1, 0)
        dx = 0.0 if k == 0 else (finger - 2) * 0.01
        dy = 0.0 if k == 0 else 0.01 + joint * 0.008
        t[k] = (base_x + dx, 0.55 + dy, 0.03)
    return t


_BODY_T = _body_template()
_FACE_T = _face_template()
_LEFT_T = _hand_template(-1.0)
_RIGHT_T = _hand_template(+1.0)


class BlobEstimator:
    """Foreground-blob fallback: dominant bright region -> template landmarks.

    min_area is the fraction of the image a region must cover to count as a
    person; below it the frame reports no person.
    """

    def __init__(self, threshold: int = 60, min_area: float = 0.01):
        self.threshold = threshold
        self.min_area = min_area

    def estimate(self, image_bgr: np.ndarray) -> PersonEstimate | None:
        import cv2

        gray = cv2.cvtColor(image_bgr, cv2.COLOR_BGR2GRAY)
        _, mask = cv2.threshold(gray, self.threshold, 255, cv2.THRESH_BINARY)
        contours, _ = cv2.findContours(mask, cv2.RETR_EXTERNAL,
                                       cv2.CHAIN_APPROX_SIMPLE)
        if not contours:
            return None
        biggest = max(contours, key=cv2.contourArea)
        area = cv2.contourArea(biggest)
        h, w = gray.shape
        if area < self.min_area * h * w:
            return None
        x, y, bw, bh = cv2.boundingRect(biggest)
        scale = np.array([bw / w, bh / h, 1.0])
        offset = np.array([x / w, y / h, 0.0])

        def place(template: np.ndarray) -> np.ndarray:
            return template * scale + offset

        body = np.concatenate([place(_BODY_T),
                               np.full((BODY_POINTS, 1), 0.9)], axis=1)
        return PersonEstimate(
            body=body,
            face=place(_FACE_T),
            left_hand=place(_LEFT_T),
            right_hand=place(_RIGHT_T),
            blendshapes=np.zeros(BLENDSHAPE_SLOTS),
        )

    def close(self) -> None:
        pass


class MediaPipeEstimator:
    """Google MediaPipe holistic solution (pose + face mesh + hands).

    The holistic graph has no blendshape head, so blendshape slots stay zero;
    downstream consumers treat slot 0 as neutral either way.
    """

    def __init__(self, model_complexity: int = 1):
        try:
            import mediapipe as mp
        except ImportError as exc:
            raise EstimatorUnavailable(
                "mediapipe is not installed; install the 'mediapipe' extra "
                "or use --estimator blob") from exc
        self._mp = mp
        self._holistic = mp.solutions.holistic.Holistic(
            static_image_mode=False,
            model_complexity=model_complexity,
            refine_face_landmarks=False,
        )

    @staticmethod
    def _landmarks(block, rows: int, with_visibility: bool) -> np.ndarray | None:
        if block is None:
            return None
        pts = block.landmark
        cols = 4 if with_visibility else 3
        out = np.zeros((rows, cols))
        for k, lm in enumerate(pts[:rows]):
            out[k, 0:3] = (lm.x, lm.y, lm.z)
            if with_visibility:
                out[k, 3] = getattr(lm, "visibility", 0.0)
        return out

    def estimate(self, image_bgr: np.ndarray) -> PersonEstimate | None:
        import cv2

        rgb = cv2.cvtColor(image_bgr, cv2.COLOR_BGR2RGB)
        result = self._holistic.process(rgb)
        if result.pose_landmarks is None:
            return None
        face = self._landmarks(result.face_landmarks, 468, False)
        return PersonEstimate(
            body=self._landmarks(result.pose_landmarks, 33, True),
            face=face,
            left_hand=self._landmarks(result.left_hand_landmarks, 21, False),
            right_hand=self._landmarks(result.right_hand_landmarks, 21, False),
            blendshapes=None,
        )

    def close(self) -> None:
        self._holistic.close()


def make_estimator(name: str = "auto"):
    """auto prefers mediapipe and falls back to the blob stand-in."""
    if name == "auto":
        try:
            return MediaPipeEstimator()
        except EstimatorUnavailable:
            return BlobEstimator()
    if name == "mediapipe":
        return MediaPipeEstimator()
    if name == "blob":
        return BlobEstimator()
    raise ValueError(f"unknown estimator {name!r}")
