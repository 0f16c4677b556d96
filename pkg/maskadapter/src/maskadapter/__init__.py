"""Mask producer for the lidar segmentation pipeline.

Runs an off-the-shelf 2D instance-segmentation model on an RGB image and
writes the mask JSON interchange file. Coupled to the consumer only through
that file format.
"""

from .backends import BACKENDS, ModelError
from .coco import COCO_CLASS_NAMES
from .extract import extract_masks
from .writer import Detection, encode_rle, write_mask_file

__version__ = "0.1.0"

__all__ = [
    "BACKENDS",
    "COCO_CLASS_NAMES",
    "Detection",
    "ModelError",
    "encode_rle",
    "extract_masks",
    "write_mask_file",
    "__version__",
]
