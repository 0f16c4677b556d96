"""Readers and writers for point clouds, calibrations, masks, and labels.

Formats:

* Point clouds: the velodyne binary layout, consecutive little-endian float32
  records (x, y, z, intensity), 16 bytes per point.
* Calibrations: ``KEY: v1 v2 ...`` text. Either the full KITTI key set
  (``P2``, ``R0_rect``, ``Tr_velo_to_cam``), composed into a single lidar-to-
  pixel 3x4 matrix, or a minimal single ``P: v1..v12`` line. Image dimensions
  come from an optional ``IMAGE_SIZE: width height`` line or the caller.
* Masks: JSON with ``width``, ``height``, and an ``instances`` list; each
  instance carries ``instance_index``, ``class_id``, ``class_name``, an
  optional ``score``, and the binary mask as zeros-first run-length counts
  over row-major pixel order. Counts must sum to width*height.
* Labels: one ``instance_id,class_id`` line per point, preceded by a header
  of ``#``-prefixed lines recording diagnostics and the instance table.

Every reader rejects malformed input with a diagnostic naming the offending
byte, line, or instance; nothing is silently truncated.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import (
    CameraCalibration,
    InstanceRecord,
    MaskInstance,
    MaskSet,
    PointCloud,
    SegmentationResult,
)

__all__ = [
    "FormatError",
    "read_point_cloud",
    "read_calibration",
    "read_masks",
    "write_masks",
    "encode_rle",
    "decode_rle",
    "read_labels",
    "write_labels",
]

POINT_RECORD_BYTES = 16


class FormatError(ValueError):
    """Raised when an input file violates its format contract."""


def read_point_cloud(path) -> PointCloud:
    """Read a velodyne-layout binary cloud: float32 (x, y, z, intensity) records."""
    raw = Path(path).read_bytes()
    if len(raw) % POINT_RECORD_BYTES:
        raise FormatError(
            f"{path}: {len(raw)} bytes is not a multiple of {POINT_RECORD_BYTES}; "
            f"file is truncated at byte {len(raw) - len(raw) % POINT_RECORD_BYTES}"
        )
    records = np.frombuffer(raw, dtype="<f4").reshape(-1, 4).astype(np.float64)
    finite = np.isfinite(records).all(axis=1)
    if not finite.all():
        raise FormatError(f"{path}: non-finite values in record {int(np.nonzero(~finite)[0][0])}")
    return PointCloud(points=records[:, :3], intensity=records[:, 3])


def _parse_key_values(path) -> dict[str, list[float]]:
    table: dict[str, list[float]] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if ":" not in line:
            raise FormatError(f"{path}:{lineno}: expected 'KEY: values', got {line!r}")
        key, _, rest = line.partition(":")
        try:
            values = [float(tok) for tok in rest.split()]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: non-numeric value ({exc})") from None
        table[key.strip()] = values
    return table


def _require(table: dict, path, key: str, count: int) -> np.ndarray:
    if key not in table:
        raise FormatError(f"{path}: missing required key {key!r}")
    if len(table[key]) != count:
        raise FormatError(
            f"{path}: key {key!r} has {len(table[key])} values, expected {count}"
        )
    return np.array(table[key], dtype=np.float64)


def read_calibration(path, image_size: tuple[int, int] | None = None) -> CameraCalibration:
    """Read a calibration file and compose the lidar-to-pixel projection.

    KITTI mode composes ``P2 @ [R0_rect | pad] @ Tr_velo_to_cam`` with both
    3x3/3x4 factors promoted to 4x4 by a (0, 0, 0, 1) bottom row. Minimal mode
    takes a single ``P`` key as the projection verbatim. ``image_size`` is a
    (width, height) fallback when the file has no ``IMAGE_SIZE`` line.
    """
    table = _parse_key_values(path)
    if "P" in table:
        projection = _require(table, path, "P", 12).reshape(3, 4)
    else:
        p2 = _require(table, path, "P2", 12).reshape(3, 4)
        r0 = _require(table, path, "R0_rect", 9).reshape(3, 3)
        tr = _require(table, path, "Tr_velo_to_cam", 12).reshape(3, 4)
        r0_h = np.eye(4)
        r0_h[:3, :3] = r0
        tr_h = np.eye(4)
        tr_h[:3, :4] = tr
        projection = p2 @ r0_h @ tr_h

    if "IMAGE_SIZE" in table:
        size = _require(table, path, "IMAGE_SIZE", 2)
        width, height = int(size[0]), int(size[1])
    elif image_size is not None:
        width, height = image_size
    else:
        raise FormatError(
            f"{path}: no IMAGE_SIZE line and no image_size argument; "
            f"image dimensions are required"
        )
    return CameraCalibration(projection=projection, image_width=width, image_height=height)


def encode_rle(mask: np.ndarray) -> list[int]:
    """Zeros-first run-length counts over row-major pixel order.

    The first count is the number of leading zero pixels (possibly 0); counts
    alternate zero-runs and one-runs and sum to the pixel count.
    """
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return [0]
    boundaries = np.nonzero(np.diff(flat))[0] + 1
    runs = np.diff(np.concatenate([[0], boundaries, [flat.size]]))
    counts = runs.tolist()
    if flat[0]:  # leading zero-run of length 0
        counts = [0] + counts
    return [int(c) for c in counts]


def decode_rle(counts: list[int], height: int, width: int) -> np.ndarray:
    """Inverse of :func:`encode_rle`; validates the total pixel count."""
    total = 0
    flat = np.zeros(height * width, dtype=bool)
    value = False
    for count in counts:
        if not isinstance(count, int) or count < 0:
            raise FormatError(f"RLE counts must be nonnegative integers, got {count!r}")
        if value:
            flat[total : total + count] = True
        total += count
        value = not value
    if total != height * width:
        raise FormatError(f"RLE counts sum to {total}, expected {height * width}")
    return flat.reshape(height, width)


def read_masks(path) -> MaskSet:
    """Read an instance-mask JSON document into a :class:`MaskSet`."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: top level must be a JSON object")
    for key in ("width", "height", "instances"):
        if key not in doc:
            raise FormatError(f"{path}: missing field {key!r}")
    if not isinstance(doc["instances"], list):
        raise FormatError(f"{path}: 'instances' must be a list")
    width, height = int(doc["width"]), int(doc["height"])

    seen = set()
    instances = []
    for pos, entry in enumerate(doc["instances"], start=1):
        if not isinstance(entry, dict):
            raise FormatError(f"{path}: instance {pos}: must be a JSON object")
        for key in ("instance_index", "class_id", "class_name", "rle"):
            if key not in entry:
                raise FormatError(f"{path}: instance {pos}: missing field {key!r}")
        if not isinstance(entry["rle"], list):
            raise FormatError(f"{path}: instance {pos}: 'rle' must be a list of counts")
        index = int(entry["instance_index"])
        if index in seen:
            raise FormatError(f"{path}: duplicate instance_index {index}")
        seen.add(index)
        if int(entry["class_id"]) == 0:
            raise FormatError(f"{path}: instance {index}: class_id 0 is reserved for background")
        try:
            mask = decode_rle(entry["rle"], height, width)
        except FormatError as exc:
            raise FormatError(f"{path}: instance {index}: {exc}") from None
        score = entry.get("score")
        instances.append(
            MaskInstance(
                instance_index=index,
                class_id=int(entry["class_id"]),
                class_name=str(entry["class_name"]),
                mask=mask,
                score=None if score is None else float(score),
            )
        )
    try:
        return MaskSet(width=width, height=height, instances=tuple(instances))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_masks(masks: MaskSet, path) -> None:
    """Write a :class:`MaskSet` as the instance-mask JSON document."""
    doc = {
        "width": masks.width,
        "height": masks.height,
        "instances": [
            {
                "instance_index": inst.instance_index,
                "class_id": inst.class_id,
                "class_name": inst.class_name,
                **({"score": inst.score} if inst.score is not None else {}),
                "rle": encode_rle(inst.mask),
            }
            for inst in masks.instances
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def write_labels(result: SegmentationResult, path) -> None:
    """Write per-point labels with a ``#`` header carrying table/diagnostics."""
    lines = [
        f"# points {len(result)}",
        f"# points_in_fov {result.points_in_fov}",
        f"# iterations_run {result.iterations_run}",
        f"# converged {'true' if result.converged else 'false'}",
    ]
    for inst_id in sorted(result.instance_table):
        rec = result.instance_table[inst_id]
        lines.append(
            f"# instance {inst_id} class_id {rec.class_id} "
            f"point_count {rec.point_count} class_name {rec.class_name}"
        )
    body = [
        f"{int(y)},{int(c)}" for y, c in zip(result.instance_ids, result.class_ids)
    ]
    Path(path).write_text("\n".join(lines + body) + "\n")


def read_labels(path, expected_points: int | None = None) -> SegmentationResult:
    """Read a label file back into a :class:`SegmentationResult`.

    Validates header/body consistency (declared point count, instance table
    recounts) and, when given, the caller's expected point count.
    """
    header: dict[str, int | bool] = {}
    table: dict[int, InstanceRecord] = {}
    instance_ids = []
    class_ids = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            tokens = line[1:].split()
            if not tokens:
                continue
            if tokens[0] == "instance":
                try:
                    inst_id = int(tokens[1])
                    fields = {tokens[i]: tokens[i + 1] for i in range(2, 6, 2)}
                    name = line.split(" class_name ", 1)[1]
                    table[inst_id] = InstanceRecord(
                        class_id=int(fields["class_id"]),
                        class_name=name,
                        point_count=int(fields["point_count"]),
                    )
                except (IndexError, KeyError, ValueError):
                    raise FormatError(f"{path}:{lineno}: malformed instance header") from None
            elif tokens[0] in ("points", "points_in_fov", "iterations_run"):
                header[tokens[0]] = int(tokens[1])
            elif tokens[0] == "converged":
                header[tokens[0]] = tokens[1] == "true"
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'instance_id,class_id', got {line!r}")
        try:
            instance_ids.append(int(parts[0]))
            class_ids.append(int(parts[1]))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-integer label in {line!r}") from None

    n = len(instance_ids)
    if "points" in header and header["points"] != n:
        raise FormatError(f"{path}: header declares {header['points']} points, body has {n}")
    if expected_points is not None and n != expected_points:
        raise FormatError(f"{path}: expected {expected_points} points, found {n}")
    try:
        return SegmentationResult(
            instance_ids=np.array(instance_ids, dtype=np.int64),
            class_ids=np.array(class_ids, dtype=np.int64),
            instance_table=table,
            iterations_run=int(header.get("iterations_run", 0)),
            converged=bool(header.get("converged", False)),
            points_in_fov=int(header.get("points_in_fov", 0)),
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
