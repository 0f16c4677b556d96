"""Core domain types plus 3D-to-2D projection and field-of-view filtering.

All types are immutable after construction (array fields are copied and marked
read-only), so instances are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

__all__ = [
    "PointCloud",
    "CameraCalibration",
    "ProjectedPoints",
    "MaskInstance",
    "MaskSet",
    "DiffusionParams",
    "InstanceRecord",
    "SegmentationResult",
    "round_half_away",
    "project_points",
    "fov_indices",
]

# Homogeneous scales smaller than this are treated as degenerate projections.
DEGENERATE_SCALE = 1e-12


def round_half_away(values: np.ndarray) -> np.ndarray:
    """Round to the nearest integer with halves away from zero.

    Symmetric and locale-independent, unlike numpy's round-half-to-even.
    """
    v = np.asarray(values, dtype=np.float64)
    return np.copysign(np.floor(np.abs(v) + 0.5), v).astype(np.int64)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class PointCloud:
    """Ordered set of 3D points in the sensor frame, in meters.

    ``intensity`` is an optional per-point reflectance in [0, 1]; it is carried
    through for callers but never used by the labeling algorithm.
    """

    points: np.ndarray
    intensity: np.ndarray | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            bad = int(np.nonzero(~np.isfinite(pts).all(axis=1))[0][0])
            raise ValueError(f"non-finite coordinates at point {bad}")
        object.__setattr__(self, "points", _frozen(pts))
        if self.intensity is not None:
            inten = np.array(self.intensity, dtype=np.float64, copy=True).reshape(-1)
            if inten.shape[0] != pts.shape[0]:
                raise ValueError(
                    f"intensity has {inten.shape[0]} values for {pts.shape[0]} points"
                )
            object.__setattr__(self, "intensity", _frozen(inten))

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class CameraCalibration:
    """3x4 matrix mapping homogeneous sensor-frame points to pixel coordinates."""

    projection: np.ndarray
    image_width: int
    image_height: int

    def __post_init__(self):
        proj = np.array(self.projection, dtype=np.float64, copy=True)
        if proj.shape != (3, 4):
            raise ValueError(f"projection must be 3x4, got {proj.shape}")
        if not np.isfinite(proj).all():
            raise ValueError("projection matrix entries must be finite")
        object.__setattr__(self, "projection", _frozen(proj))
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError(
                f"image dimensions must be positive, got "
                f"{self.image_width}x{self.image_height}"
            )


@dataclass(frozen=True)
class ProjectedPoints:
    """Per-point continuous pixel coordinates, depth, and visibility flag.

    ``depth`` is the third homogeneous coordinate before dehomogenization
    (signed distance along the optical axis). ``in_fov`` is true iff depth > 0
    and the rounded pixel falls inside the image rectangle.
    """

    u: np.ndarray
    v: np.ndarray
    depth: np.ndarray
    in_fov: np.ndarray

    def __post_init__(self):
        n = len(self.u)
        if not (len(self.v) == len(self.depth) == len(self.in_fov) == n):
            raise ValueError("projected point arrays must share one length")

    def __len__(self) -> int:
        return len(self.u)


@dataclass(frozen=True)
class MaskInstance:
    """One detected 2D object instance: a binary pixel mask plus its class."""

    instance_index: int
    class_id: int
    class_name: str
    mask: np.ndarray
    score: float | None = None

    def __post_init__(self):
        m = np.array(self.mask, dtype=bool, copy=True)
        if m.ndim != 2:
            raise ValueError(f"mask must be 2D (height, width), got {m.shape}")
        object.__setattr__(self, "mask", _frozen(m))
        if self.class_id < 1:
            raise ValueError("class_id 0 is reserved for background")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class MaskSet:
    """Image dimensions plus M instance masks, indexed contiguously 1..M."""

    width: int
    height: int
    instances: tuple[MaskInstance, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        if self.width <= 0 or self.height <= 0:
            raise ValueError("mask image dimensions must be positive")
        for pos, inst in enumerate(self.instances, start=1):
            if inst.instance_index != pos:
                raise ValueError(
                    f"instance indices must be contiguous 1..M; "
                    f"position {pos} holds index {inst.instance_index}"
                )
            if inst.mask.shape != (self.height, self.width):
                raise ValueError(
                    f"instance {pos} mask shape {inst.mask.shape} does not match "
                    f"image {self.height}x{self.width}"
                )

    def __len__(self) -> int:
        return len(self.instances)

    def class_of(self, instance_id: int) -> int:
        """Class id for an instance id, with 0 mapping to background."""
        if instance_id == 0:
            return 0
        return self.instances[instance_id - 1].class_id


@dataclass(frozen=True)
class DiffusionParams:
    """Tuning knobs for graph construction and the diffusion iteration.

    Defaults follow the reference configuration: pixel_weight (the per-pixel
    coupling constant) 0.001, 10 neighbors, kernel scale 1, a 5x5 pixel box,
    and a 200-iteration cap.
    """

    pixel_weight: float = 0.001
    k_neighbors: int = 10
    sigma: float = 1.0
    box_size: int = 5
    max_iters: int = 200
    tolerance: float = 1e-5
    outlier_removal: bool = True

    def __post_init__(self):
        if self.pixel_weight <= 0:
            raise ValueError("pixel_weight must be positive")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be a positive integer")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.box_size < 1 or self.box_size % 2 == 0:
            raise ValueError(f"box_size must be odd and positive, got {self.box_size}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be a positive integer")
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")


@dataclass(frozen=True)
class InstanceRecord:
    """Summary row for one labeled instance in a segmentation result."""

    class_id: int
    class_name: str
    point_count: int


@dataclass(frozen=True)
class SegmentationResult:
    """Per-point instance and class labels plus run diagnostics.

    Label 0 is background; out-of-view points always carry label 0. The
    instance table summarizes every nonzero instance present in the labels.
    """

    instance_ids: np.ndarray
    class_ids: np.ndarray
    instance_table: dict[int, InstanceRecord] = field(default_factory=dict)
    iterations_run: int = 0
    converged: bool = False
    points_in_fov: int = 0

    def __post_init__(self):
        inst = np.array(self.instance_ids, dtype=np.int64, copy=True).reshape(-1)
        cls = np.array(self.class_ids, dtype=np.int64, copy=True).reshape(-1)
        if inst.shape != cls.shape:
            raise ValueError("instance_ids and class_ids must share one length")
        if ((inst == 0) != (cls == 0)).any():
            bad = int(np.nonzero((inst == 0) != (cls == 0))[0][0])
            raise ValueError(f"class_id must be 0 exactly when instance_id is 0 (point {bad})")
        object.__setattr__(self, "instance_ids", _frozen(inst))
        object.__setattr__(self, "class_ids", _frozen(cls))
        object.__setattr__(self, "instance_table", dict(self.instance_table))

        counts: dict[int, int] = {}
        for y in inst[inst != 0]:
            counts[int(y)] = counts.get(int(y), 0) + 1
        table_counts = {k: rec.point_count for k, rec in self.instance_table.items()}
        if counts != table_counts:
            raise ValueError(
                f"instance table counts {table_counts} disagree with labels {counts}"
            )
        for inst_id, rec in self.instance_table.items():
            mismatched = (inst == inst_id) & (cls != rec.class_id)
            if mismatched.any():
                raise ValueError(
                    f"instance {inst_id} points carry class ids other than {rec.class_id}"
                )

    def __len__(self) -> int:
        return self.instance_ids.shape[0]


def project_points(cloud: PointCloud, calib: CameraCalibration) -> ProjectedPoints:
    """Project every point through the 3x4 calibration matrix.

    Returns continuous pixel coordinates (u, v), the signed depth along the
    optical axis, and the in-view flag. Points behind the camera or with a
    near-zero homogeneous scale are flagged out of view, never raised on.
    """
    pts = cloud.points
    hom = np.empty((len(cloud), 4), dtype=np.float64)
    hom[:, :3] = pts
    hom[:, 3] = 1.0
    uvw = hom @ calib.projection.T  # (N, 3)
    depth = uvw[:, 2].copy()

    degenerate = np.abs(depth) < DEGENERATE_SCALE
    safe = np.where(degenerate, 1.0, depth)
    u = np.where(degenerate, 0.0, uvw[:, 0] / safe)
    v = np.where(degenerate, 0.0, uvw[:, 1] / safe)

    ui = round_half_away(u)
    vi = round_half_away(v)
    in_fov = (
        (depth > 0)
        & ~degenerate
        & (ui >= 0)
        & (ui < calib.image_width)
        & (vi >= 0)
        & (vi < calib.image_height)
    )
    return ProjectedPoints(
        u=_frozen(u), v=_frozen(v), depth=_frozen(depth), in_fov=_frozen(in_fov)
    )


def fov_indices(projected: ProjectedPoints) -> np.ndarray:
    """Indices of in-view points, ascending.

    The diffusion graph is built over exactly this subset; labels for the
    remaining points are fixed to background when scattering back.
    """
    return np.nonzero(np.asarray(projected.in_fov))[0].astype(np.int64)
