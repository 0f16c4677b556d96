"""Run a 2D instance-segmentation backend and emit a mask JSON file."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .backends import ModelError, run_backend
from .writer import write_mask_file

__all__ = ["extract_masks", "ModelError"]

DEFAULT_SCORE_THRESHOLD = 0.5


def extract_masks(
    image_path,
    out_path,
    model: str = "torchvision",
    score_threshold: float = DEFAULT_SCORE_THRESHOLD,
) -> int:
    """Segment one image and write the mask document; returns instance count.

    Detections below ``score_threshold`` are dropped; the survivors are
    written with instance ids 1..M in descending score order. An image with
    no detections still produces a valid (empty) mask file.
    """
    try:
        with Image.open(image_path) as img:
            image = np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError) as exc:
        raise ModelError(f"unreadable image {image_path}: {exc}") from None

    detections = run_backend(model, image)
    kept = [d for d in detections if d.score >= score_threshold]
    height, width = image.shape[:2]
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_mask_file(kept, width=width, height=height, path=out_path)
    return len(kept)
