"""extract --video PATH --session ID --out DIR [--fps 10] [--estimator auto]"""

from __future__ import annotations

import argparse
import sys

from .estimators import EstimatorUnavailable, make_estimator
from .extract import VideoUnreadable, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Convert a video into a landmark recording file.")
    parser.add_argument("--video", required=True)
    parser.add_argument("--session", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--fps", type=float, default=10.0)
    parser.add_argument("--estimator", choices=("auto", "mediapipe", "blob"),
                        default="auto")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        estimator = make_estimator(args.estimator)
    except EstimatorUnavailable as exc:
        print(f"error[estimator]: {exc}", file=sys.stderr)
        return 1
    try:
        out_path = extract(args.video, args.session, args.out, fps=args.fps,
                           estimator=estimator)
    except (VideoUnreadable, ValueError, OSError) as exc:
        print(f"error[extract]: {exc}", file=sys.stderr)
        return 1
    finally:
        estimator.close()
    print(out_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
