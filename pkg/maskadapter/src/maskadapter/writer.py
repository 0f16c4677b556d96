"""Instance-mask JSON document writer.

This module implements the interchange contract consumed by the lidarseg
pipeline: a JSON object with ``width``, ``height``, and an ``instances`` list
whose binary masks are zeros-first run-length counts over row-major pixel
order, summing to ``width * height``. The encoder here is intentionally
independent of the consumer's implementation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["Detection", "encode_rle", "write_mask_file"]


@dataclass(frozen=True)
class Detection:
    """One detected object: class, confidence, and a binary (H, W) mask."""

    class_id: int
    class_name: str
    score: float
    mask: np.ndarray


def encode_rle(mask: np.ndarray) -> list[int]:
    """Run-length counts over the flattened mask, zero-run first."""
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return [0]
    edges = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [flat.size]])
    counts = (ends - starts).tolist()
    if flat[0]:
        counts.insert(0, 0)
    return [int(c) for c in counts]


def write_mask_file(detections: list[Detection], width: int, height: int, path) -> None:
    """Write detections sorted by descending score, instance ids 1..M.

    Equal scores keep the detections' input order, so output is deterministic
    for a deterministic backend.
    """
    ordered = sorted(
        enumerate(detections), key=lambda pair: (-pair[1].score, pair[0])
    )
    instances = []
    for index, (_, det) in enumerate(ordered, start=1):
        if det.mask.shape != (height, width):
            raise ValueError(
                f"detection mask shape {det.mask.shape} does not match "
                f"image {height}x{width}"
            )
        if det.class_id < 1:
            raise ValueError(f"class_id must be >= 1, got {det.class_id}")
        instances.append(
            {
                "instance_index": index,
                "class_id": int(det.class_id),
                "class_name": det.class_name,
                "score": float(det.score),
                "rle": encode_rle(det.mask),
            }
        )
    doc = {"width": int(width), "height": int(height), "instances": instances}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")
