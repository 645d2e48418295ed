"""Video to recording-file conversion with fixed-rate frame sampling."""

from __future__ import annotations

import os

import cv2

from .schema import assemble_record, record_to_line

RECORDING_SUFFIX = ".rec.jsonl"


class VideoUnreadable(RuntimeError):
    pass


def sample_timestamps_ms(duration_s: float, fps: float) -> list[int]:
    """Output frame k sits at k * (1000/fps) ms; frames past the end are cut.

    A 5-second clip at the default 10 fps yields 50 output frames.
    """
    interval_ms = 1000.0 / fps
    n = int(duration_s * fps + 1e-9)
    return [int(round(k * interval_ms)) for k in range(n)]


def nearest_source_index(timestamp_ms: int, src_fps: float,
                         n_frames: int) -> int:
    idx = int(round(timestamp_ms / 1000.0 * src_fps))
    return min(max(idx, 0), n_frames - 1)


def extract(video_path: str | os.PathLike, session_id: str,
            out_dir: str | os.PathLike, fps: float = 10.0,
            estimator=None) -> str:
    """Convert one video to ``<out_dir>/<session_id>.rec.jsonl``.

    Frames are sampled at the target rate by nearest source timestamp (which
    tolerates variable-rate sources); frames with no detected person emit
    all-zero landmarks with zero visibility. Returns the output path.
    """
    if estimator is None:
        from .estimators import make_estimator
        estimator = make_estimator()
    video_path = os.fspath(video_path)
    cap = cv2.VideoCapture(video_path)
    if not cap.isOpened():
        raise VideoUnreadable(f"cannot open video {video_path}")
    try:
        src_fps = cap.get(cv2.CAP_PROP_FPS) or 0.0
        n_src = int(cap.get(cv2.CAP_PROP_FRAME_COUNT))
        if src_fps <= 0 or n_src <= 0:
            raise VideoUnreadable(
                f"{video_path}: no decodable frame metadata "
                f"(fps={src_fps}, frames={n_src})")
        if fps > src_fps + 1e-9:
            raise ValueError(
                f"target fps {fps} exceeds source fps {src_fps:.3f}")
        duration_s = n_src / src_fps
        wanted = [nearest_source_index(ts, src_fps, n_src)
                  for ts in sample_timestamps_ms(duration_s, fps)]
        frames = []
        src_idx = 0
        take = 0
        while take < len(wanted):
            ok, image = cap.read()
            if not ok:
                break
            while take < len(wanted) and wanted[take] == src_idx:
                frames.append(estimator.estimate(image))
                take += 1
            src_idx += 1
    finally:
        cap.release()
    if not frames:
        raise VideoUnreadable(f"{video_path}: no frames decoded")
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, session_id + RECORDING_SUFFIX)
    with open(out_path, "w", encoding="utf-8") as fh:
        for k, estimate in enumerate(frames):
            fh.write(record_to_line(assemble_record(session_id, k, estimate)))
            fh.write("\n")
    return out_path
