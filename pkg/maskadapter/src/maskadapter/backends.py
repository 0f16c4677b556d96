"""Segmentation backends producing Detection lists from an RGB image array.

``torchvision``: Mask-RCNN pretrained on COCO. Needs torch/torchvision and
the pretrained weights (downloaded on first use); raises ModelError when
either is unavailable.

``blob``: a deterministic offline segmenter for testing and air-gapped runs.
It separates connected color blobs from the dominant border color and maps
each blob's hue to a fixed COCO class. Not a detector in any real sense, but
it produces valid, reproducible mask files without model weights.
"""

from __future__ import annotations

import numpy as np

from .coco import COCO_CLASS_NAMES
from .writer import Detection

__all__ = ["ModelError", "BACKENDS", "run_backend"]


class ModelError(RuntimeError):
    """A segmentation backend could not be loaded or executed."""


# hue sextant (red, yellow, green, cyan, blue, magenta) -> COCO class id
_BLOB_CLASS_BY_HUE = (1, 3, 8, 2, 62, 64)  # person, car, truck, bicycle, chair, potted plant
_BLOB_MIN_AREA = 16
_BLOB_COLOR_TOLERANCE = 24


def _blob_backend(image: np.ndarray, **_: object) -> list[Detection]:
    from scipy import ndimage

    height, width = image.shape[:2]
    border = np.concatenate(
        [image[0], image[-1], image[:, 0], image[:, -1]], axis=0
    ).reshape(-1, 3)
    colors, counts = np.unique(border, axis=0, return_counts=True)
    background = colors[np.argmax(counts)].astype(np.int64)

    foreground = (
        np.abs(image.astype(np.int64) - background).max(axis=2) > _BLOB_COLOR_TOLERANCE
    )
    labeled, n_blobs = ndimage.label(foreground, structure=np.ones((3, 3), dtype=int))

    areas = ndimage.sum_labels(np.ones_like(labeled), labeled, index=range(1, n_blobs + 1))
    max_area = float(areas.max()) if n_blobs else 1.0

    detections = []
    for blob_id in range(1, n_blobs + 1):
        mask = labeled == blob_id
        area = float(areas[blob_id - 1])
        if area < _BLOB_MIN_AREA:
            continue
        r, g, b = (float(image[..., c][mask].mean()) for c in range(3))
        hue = _mean_hue(r, g, b)
        class_id = _BLOB_CLASS_BY_HUE[int(hue // 60) % 6]
        detections.append(
            Detection(
                class_id=class_id,
                class_name=COCO_CLASS_NAMES[class_id],
                score=round(0.5 + 0.5 * area / max_area, 6),
                mask=mask,
            )
        )
    return detections


def _mean_hue(r: float, g: float, b: float) -> float:
    hi, lo = max(r, g, b), min(r, g, b)
    if hi == lo:
        return 0.0
    span = hi - lo
    if hi == r:
        hue = 60.0 * (((g - b) / span) % 6)
    elif hi == g:
        hue = 60.0 * ((b - r) / span + 2)
    else:
        hue = 60.0 * ((r - g) / span + 4)
    return hue % 360.0


def _torchvision_backend(image: np.ndarray, mask_threshold: float = 0.5, **_: object) -> list[Detection]:
    try:
        import torch
        from torchvision.models.detection import (
            MaskRCNN_ResNet50_FPN_Weights,
            maskrcnn_resnet50_fpn,
        )
    except ImportError as exc:
        raise ModelError(f"torchvision backend unavailable: {exc}") from None

    weights = MaskRCNN_ResNet50_FPN_Weights.COCO_V1
    try:
        model = maskrcnn_resnet50_fpn(weights=weights, progress=False)
    except Exception as exc:  # weight download failure, corrupt cache, ...
        raise ModelError(f"could not load pretrained weights: {exc}") from None
    model.eval()

    categories = weights.meta["categories"]
    tensor = torch.from_numpy(image.astype(np.float32) / 255.0).permute(2, 0, 1)
    with torch.no_grad():
        output = model([tensor])[0]

    detections = []
    for label, score, soft_mask in zip(
        output["labels"].tolist(),
        output["scores"].tolist(),
        output["masks"].cpu().numpy(),
    ):
        detections.append(
            Detection(
                class_id=int(label),
                class_name=categories[int(label)],
                score=float(score),
                mask=soft_mask[0] >= mask_threshold,
            )
        )
    return detections


BACKENDS = {"blob": _blob_backend, "torchvision": _torchvision_backend}


def run_backend(name: str, image: np.ndarray, **kwargs) -> list[Detection]:
    try:
        backend = BACKENDS[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r}; available: {sorted(BACKENDS)}") from None
    return backend(image, **kwargs)
