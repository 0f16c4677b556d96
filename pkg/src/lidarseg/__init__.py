"""Lidar point-cloud instance segmentation from 2D camera masks.

Labels every 3D point by diffusing 2D instance-mask labels through a sparse
graph that couples image pixels to projected lidar points and lidar points to
their nearest neighbors.
"""

from . import io_formats, kernel
from .diffusion import DiffusionReport, LabelField, assign_labels, diffuse, init_label_field
from .graph import (
    DiffusionGraph,
    KnnSubgraph,
    PixelSubgraph,
    assemble_normalized,
    build_knn_subgraph,
    build_pixel_subgraph,
)
from .metrics import (
    InstanceReport,
    MatchedPair,
    SemanticReport,
    instance_pr,
    match_instances,
    semantic_metrics,
)
from .model import (
    CameraCalibration,
    DiffusionParams,
    InstanceRecord,
    MaskInstance,
    MaskSet,
    PointCloud,
    ProjectedPoints,
    SegmentationResult,
    fov_indices,
    project_points,
)
from .pipeline import segment, segment_direct
from .refine import remove_outliers

__version__ = "0.1.0"

__all__ = [
    "io_formats",
    "kernel",
    "CameraCalibration",
    "DiffusionGraph",
    "DiffusionParams",
    "DiffusionReport",
    "InstanceRecord",
    "InstanceReport",
    "KnnSubgraph",
    "LabelField",
    "MaskInstance",
    "MaskSet",
    "MatchedPair",
    "PixelSubgraph",
    "PointCloud",
    "ProjectedPoints",
    "SegmentationResult",
    "SemanticReport",
    "assemble_normalized",
    "assign_labels",
    "build_knn_subgraph",
    "build_pixel_subgraph",
    "diffuse",
    "fov_indices",
    "init_label_field",
    "instance_pr",
    "match_instances",
    "project_points",
    "remove_outliers",
    "segment",
    "segment_direct",
    "semantic_metrics",
    "__version__",
]
