"""End-to-end segmentation runs: the full diffusion pipeline and the naive
direct-projection baseline.

The full pipeline: project points, keep the in-view subset, build and
normalize the neighbor/pixel graph, diffuse mask labels to convergence,
assign per-point labels, and optionally strip per-instance outliers. The
baseline skips every graph step and labels each point by the mask its rounded
projection lands in.
"""

from __future__ import annotations

import time

import numpy as np

from .diffusion import assign_labels, diffuse, init_label_field
from .graph import assemble_normalized, build_knn_subgraph, build_pixel_subgraph
from .model import (
    CameraCalibration,
    DiffusionParams,
    InstanceRecord,
    MaskSet,
    PointCloud,
    SegmentationResult,
    fov_indices,
    project_points,
    round_half_away,
)
from .refine import remove_outliers

__all__ = ["segment", "segment_direct"]


def _empty_result(n_total: int) -> SegmentationResult:
    zeros = np.zeros(n_total, dtype=np.int64)
    return SegmentationResult(
        instance_ids=zeros,
        class_ids=zeros.copy(),
        instance_table={},
        iterations_run=0,
        converged=True,
        points_in_fov=0,
    )


class _Stopwatch:
    def __init__(self, sink: dict | None):
        self.sink = sink
        self.last = time.perf_counter()

    def lap(self, stage: str) -> None:
        now = time.perf_counter()
        if self.sink is not None:
            self.sink[stage] = self.sink.get(stage, 0.0) + (now - self.last)
        self.last = now


def _check_dimensions(calib: CameraCalibration, masks: MaskSet) -> None:
    if (calib.image_width, calib.image_height) != (masks.width, masks.height):
        raise ValueError(
            f"calibration image {calib.image_width}x{calib.image_height} does not "
            f"match mask image {masks.width}x{masks.height}"
        )


def segment(
    cloud: PointCloud,
    calib: CameraCalibration,
    masks: MaskSet,
    params: DiffusionParams | None = None,
    *,
    backend: str | None = None,
    timings: dict | None = None,
) -> SegmentationResult:
    """Run the full label-diffusion pipeline on one frame.

    ``timings``, when given, is filled with per-stage wall-clock seconds.
    An empty cloud or an empty field of view yields an all-background result.
    """
    params = params or DiffusionParams()
    _check_dimensions(calib, masks)
    watch = _Stopwatch(timings)

    projected = project_points(cloud, calib)
    fov = fov_indices(projected)
    watch.lap("project")
    if len(fov) == 0:
        return _empty_result(len(cloud))

    knn = build_knn_subgraph(cloud.points[fov], params.k_neighbors, params.sigma)
    watch.lap("knn_graph")
    pix = build_pixel_subgraph(
        projected, fov, masks.width, masks.height, params.box_size, params.pixel_weight
    )
    graph = assemble_normalized(knn, pix)
    watch.lap("pixel_graph")

    field = init_label_field(masks, n_points=len(fov))
    field, report = diffuse(
        graph, field, params.max_iters, params.tolerance, backend=backend
    )
    watch.lap("diffusion")

    result = assign_labels(field, fov, len(cloud), masks, report=report)
    if params.outlier_removal:
        result = remove_outliers(result, knn, fov)
    watch.lap("labeling")
    return result


def segment_direct(
    cloud: PointCloud,
    calib: CameraCalibration,
    masks: MaskSet,
    *,
    timings: dict | None = None,
) -> SegmentationResult:
    """Naive baseline: label each in-view point by its landing pixel's mask.

    No diffusion and no outlier removal; mask overlaps resolve to the lowest
    instance index. Useful as the degenerate reference the diffusion pipeline
    is measured against.
    """
    _check_dimensions(calib, masks)
    watch = _Stopwatch(timings)
    projected = project_points(cloud, calib)
    fov = fov_indices(projected)
    watch.lap("project")
    if len(fov) == 0:
        return _empty_result(len(cloud))

    # Lowest instance index wins overlaps: paint masks in reverse order.
    pixel_owner = np.zeros((masks.height, masks.width), dtype=np.int64)
    for inst in reversed(masks.instances):
        pixel_owner[inst.mask] = inst.instance_index

    cu = round_half_away(np.asarray(projected.u)[fov])
    cv = round_half_away(np.asarray(projected.v)[fov])
    instance_ids = np.zeros(len(cloud), dtype=np.int64)
    instance_ids[fov] = pixel_owner[cv, cu]

    class_lookup = np.zeros(len(masks) + 1, dtype=np.int64)
    for inst in masks.instances:
        class_lookup[inst.instance_index] = inst.class_id
    class_ids = class_lookup[instance_ids]

    table = {}
    for inst in masks.instances:
        count = int((instance_ids == inst.instance_index).sum())
        if count:
            table[inst.instance_index] = InstanceRecord(
                class_id=inst.class_id, class_name=inst.class_name, point_count=count
            )
    watch.lap("labeling")
    return SegmentationResult(
        instance_ids=instance_ids,
        class_ids=class_ids,
        instance_table=table,
        iterations_run=0,
        converged=False,
        points_in_fov=len(fov),
    )
