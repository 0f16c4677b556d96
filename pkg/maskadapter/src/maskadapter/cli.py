"""extract-masks: image in, instance-mask JSON out.

Exit codes: 0 success, 2 usage error, 1 image/model error.
"""

from __future__ import annotations

import argparse
import sys

from .backends import BACKENDS, ModelError
from .extract import DEFAULT_SCORE_THRESHOLD, extract_masks


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="extract-masks",
        description="Run 2D instance segmentation on an image and write the "
        "mask JSON file consumed by the lidar segmentation pipeline.",
    )
    parser.add_argument("--image", required=True, help="input RGB image")
    parser.add_argument("--out", required=True, help="output mask JSON path")
    parser.add_argument(
        "--score-threshold",
        type=float,
        default=DEFAULT_SCORE_THRESHOLD,
        help="keep detections with score >= this (default 0.5)",
    )
    parser.add_argument(
        "--model",
        default="torchvision",
        choices=sorted(BACKENDS),
        help="segmentation backend (default: torchvision Mask-RCNN)",
    )
    args = parser.parse_args(argv)
    try:
        count = extract_masks(
            args.image, args.out, model=args.model, score_threshold=args.score_threshold
        )
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} instances -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
