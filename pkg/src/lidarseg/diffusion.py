"""Label-field initialization, the diffusion iteration, and label assignment.

Each object instance m (plus background, column 0) has a likelihood column.
Point entries start at zero; pixel entries are fixed 0/1 sources taken from
the instance masks, with a pixel counting as background exactly when no mask
covers it. Iterating the row-stochastic graph drives point likelihoods to a
fixed point, after which each point takes the most likely column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernel
from .graph import DiffusionGraph
from .model import InstanceRecord, MaskSet, SegmentationResult

__all__ = [
    "LabelField",
    "DiffusionReport",
    "init_label_field",
    "diffuse",
    "assign_labels",
]


@dataclass(frozen=True)
class LabelField:
    """Point-block likelihoods ``z`` (n x M+1) and fixed pixel sources.

    ``z_pix`` is an (n_pixels x M+1) 0/1 sparse matrix: row j lists the
    instances whose mask covers pixel j, or column 0 when none does. It never
    changes during diffusion.
    """

    z: np.ndarray
    z_pix: sp.csr_matrix

    @property
    def n_labels(self) -> int:
        return self.z.shape[1]


@dataclass(frozen=True)
class DiffusionReport:
    """Termination diagnostics for one diffusion run."""

    iterations_run: int
    converged: bool
    max_delta: float


def init_label_field(masks: MaskSet, n_points: int) -> LabelField:
    """Zero point likelihoods plus 0/1 pixel sources from the masks.

    Overlapping masks put multiple ones in a pixel row; the argmax in
    :func:`assign_labels` resolves them later.
    """
    n_pixels = masks.width * masks.height
    n_cols = len(masks) + 1

    rows = []
    cols = []
    covered = np.zeros(n_pixels, dtype=bool)
    for inst in masks.instances:
        flat = inst.mask.ravel()
        hit = np.nonzero(flat)[0]
        rows.append(hit)
        cols.append(np.full(hit.shape, inst.instance_index, dtype=np.int64))
        covered |= flat
    background = np.nonzero(~covered)[0]
    rows.append(background)
    cols.append(np.zeros(background.shape, dtype=np.int64))

    all_rows = np.concatenate(rows)
    all_cols = np.concatenate(cols)
    z_pix = sp.coo_matrix(
        (np.ones(all_rows.shape, dtype=np.float64), (all_rows, all_cols)),
        shape=(n_pixels, n_cols),
    ).tocsr()
    return LabelField(z=np.zeros((n_points, n_cols), dtype=np.float64), z_pix=z_pix)


def diffuse(
    graph: DiffusionGraph,
    field: LabelField,
    max_iters: int,
    tolerance: float,
    backend: str | None = None,
) -> tuple[LabelField, DiffusionReport]:
    """Iterate ``z <- A z + B z_pix`` for all columns until convergence.

    Stops when the largest absolute entry change falls below ``tolerance`` or
    after ``max_iters`` passes. Pixel sources are constant, so their product
    is computed once. Every point entry stays within [0, 1]: each row of
    [A | B] is a convex-combination weighting.
    """
    if graph.n != field.z.shape[0]:
        raise ValueError(f"graph has {graph.n} points but field.z has {field.z.shape[0]} rows")
    if graph.n_pixels != field.z_pix.shape[0]:
        raise ValueError(
            f"graph has {graph.n_pixels} pixel columns but field.z_pix has "
            f"{field.z_pix.shape[0]} rows"
        )
    source = np.asarray((graph.B @ field.z_pix).toarray(), dtype=np.float64)
    z, iterations, delta = kernel.csr_diffuse(
        graph.A, field.z, source, max_iters, tolerance, backend=backend
    )
    report = DiffusionReport(
        iterations_run=iterations, converged=bool(delta < tolerance), max_delta=float(delta)
    )
    return LabelField(z=z, z_pix=field.z_pix), report


def assign_labels(
    field: LabelField,
    fov: np.ndarray,
    n_total: int,
    masks: MaskSet,
    report: DiffusionReport | None = None,
) -> SegmentationResult:
    """Per-point argmax over label columns, scattered back to the full cloud.

    A point is background when its row is all zero or its maximum is shared
    with column 0; ties among object columns break to the lowest instance
    index. Out-of-view points are labeled 0.
    """
    fov = np.asarray(fov, dtype=np.int64)
    z = field.z
    if z.shape[0] != len(fov):
        raise ValueError(f"field has {z.shape[0]} rows but fov lists {len(fov)} points")

    if z.size:
        best = np.argmax(z, axis=1)  # lowest index wins ties
        best[z[:, 0] == z.max(axis=1)] = 0  # background ties lose to nothing
    else:
        best = np.zeros(0, dtype=np.int64)

    instance_ids = np.zeros(n_total, dtype=np.int64)
    instance_ids[fov] = best

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
    return SegmentationResult(
        instance_ids=instance_ids,
        class_ids=class_ids,
        instance_table=table,
        iterations_run=report.iterations_run if report else 0,
        converged=report.converged if report else False,
        points_in_fov=len(fov),
    )
