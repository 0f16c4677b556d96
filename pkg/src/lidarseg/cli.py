"""Command-line interface: ``lidarseg segment`` and ``lidarseg evaluate``.

Exit codes: 0 on success, 2 for usage errors (argparse), 1 for data or
runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from .io_formats import (
    FormatError,
    read_calibration,
    read_labels,
    read_masks,
    read_point_cloud,
    write_labels,
)
from .metrics import instance_pr, match_instances, semantic_metrics
from .model import DiffusionParams
from .pipeline import segment, segment_direct

DEFAULTS = DiffusionParams()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lidarseg",
        description="Segment lidar point clouds by diffusing 2D instance masks "
        "through a pixel/point graph, and evaluate the results.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="label one point cloud from masks")
    seg.add_argument("--cloud", required=True, help="velodyne-layout binary point cloud")
    seg.add_argument("--calib", required=True, help="calibration file (KITTI or minimal P)")
    seg.add_argument("--masks", required=True, help="instance-mask JSON file")
    seg.add_argument("--out", required=True, help="output label file")
    seg.add_argument("--k", type=int, default=DEFAULTS.k_neighbors, help="neighbors per point")
    seg.add_argument("--sigma", type=float, default=DEFAULTS.sigma, help="kernel scale")
    seg.add_argument(
        "--lambda",
        dest="pixel_weight",
        type=float,
        default=DEFAULTS.pixel_weight,
        help="pixel-to-point coupling weight",
    )
    seg.add_argument("--box", type=int, default=DEFAULTS.box_size, help="pixel box side (odd)")
    seg.add_argument("--max-iters", type=int, default=DEFAULTS.max_iters)
    seg.add_argument("--tol", type=float, default=DEFAULTS.tolerance)
    seg.add_argument(
        "--no-outlier-removal",
        action="store_true",
        help="skip the largest-connected-component cleanup",
    )
    seg.add_argument(
        "--direct-projection",
        action="store_true",
        help="baseline: label points by their landing mask, no graph steps",
    )
    seg.add_argument("--timing", action="store_true", help="print per-stage wall-clock")
    seg.set_defaults(func=_cmd_segment)

    ev = sub.add_parser("evaluate", help="compare predicted labels against ground truth")
    ev.add_argument("--pred", required=True, help="predicted label file")
    ev.add_argument("--truth", required=True, help="ground-truth label file")
    ev.add_argument(
        "--iou-threshold",
        type=float,
        action="append",
        default=None,
        help="instance IoU threshold; repeatable (default: 0.5 and 0.7)",
    )
    ev.add_argument(
        "--classes",
        default=None,
        help="comma-separated class ids or names to evaluate (default: all present)",
    )
    ev.add_argument("--json", action="store_true", help="emit machine-readable JSON")
    ev.set_defaults(func=_cmd_evaluate)
    return parser


def _cmd_segment(args) -> int:
    masks = read_masks(args.masks)
    calib = read_calibration(args.calib, image_size=(masks.width, masks.height))
    cloud = read_point_cloud(args.cloud)
    timings: dict[str, float] = {}

    if args.direct_projection:
        result = segment_direct(cloud, calib, masks, timings=timings)
    else:
        params = DiffusionParams(
            pixel_weight=args.pixel_weight,
            k_neighbors=args.k,
            sigma=args.sigma,
            box_size=args.box,
            max_iters=args.max_iters,
            tolerance=args.tol,
            outlier_removal=not args.no_outlier_removal,
        )
        result = segment(cloud, calib, masks, params, timings=timings)

    write_labels(result, args.out)
    if args.timing:
        total = sum(timings.values())
        for stage, seconds in timings.items():
            print(f"{stage}: {seconds * 1e3:.1f} ms")
        print(f"total: {total * 1e3:.1f} ms")
    labeled = sum(rec.point_count for rec in result.instance_table.values())
    print(
        f"labeled {labeled} of {len(result)} points across "
        f"{len(result.instance_table)} instances -> {args.out}"
    )
    return 0


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.4f}"


def _class_names(*results) -> dict[int, str]:
    names: dict[int, str] = {}
    for result in results:
        for rec in result.instance_table.values():
            names.setdefault(rec.class_id, rec.class_name)
    return names


def _parse_classes(spec: str | None, names: dict[int, str]) -> list[int] | None:
    if spec is None:
        return None
    by_name = {name: cid for cid, name in names.items()}
    out = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        if token.lstrip("-").isdigit():
            out.append(int(token))
        elif token in by_name:
            out.append(by_name[token])
        else:
            raise FormatError(f"unknown class {token!r}; known: {sorted(by_name)}")
    return out


def _cmd_evaluate(args) -> int:
    pred = read_labels(args.pred)
    truth = read_labels(args.truth)
    if len(pred) != len(truth):
        raise FormatError(
            f"point-count mismatch: {args.pred} has {len(pred)}, {args.truth} has {len(truth)}"
        )
    thresholds = args.iou_threshold or [0.5, 0.7]
    names = _class_names(truth, pred)
    classes = _parse_classes(args.classes, names)

    semantic = semantic_metrics(pred.class_ids, truth.class_ids, classes=classes)
    matching = match_instances(
        pred.instance_ids, pred.class_ids, truth.instance_ids, truth.class_ids
    )
    pred_instances = {i: rec.class_id for i, rec in pred.instance_table.items()}
    truth_instances = {i: rec.class_id for i, rec in truth.instance_table.items()}
    if classes is not None:
        wanted = set(classes)
        pred_instances = {i: c for i, c in pred_instances.items() if c in wanted}
        truth_instances = {i: c for i, c in truth_instances.items() if c in wanted}
        matching = [m for m in matching if m.class_id in wanted]
    reports = [
        instance_pr(matching, pred_instances, truth_instances, t) for t in thresholds
    ]

    if args.json:
        payload = {
            "semantic": {
                str(c): {
                    "class_name": names.get(c, str(c)),
                    "precision": m.precision,
                    "recall": m.recall,
                    "iou": m.iou,
                    "n_pred": m.n_pred,
                    "n_truth": m.n_truth,
                    "n_intersection": m.n_intersection,
                }
                for c, m in semantic.per_class.items()
            },
            "instance": [
                {
                    "class_id": row.class_id,
                    "class_name": names.get(row.class_id, str(row.class_id)),
                    "iou_threshold": report.threshold,
                    "tp": row.tp,
                    "fp": row.fp,
                    "fn": row.fn,
                    "precision": row.precision,
                    "recall": row.recall,
                }
                for report in reports
                for row in report.rows.values()
            ],
            "matching": [
                {
                    "pred_id": m.pred_id,
                    "truth_id": m.truth_id,
                    "class_id": m.class_id,
                    "iou": m.iou,
                }
                for m in matching
            ],
        }
        print(json.dumps(payload, indent=1))
        return 0

    print("semantic segmentation")
    print(f"{'class':>12} {'precision':>10} {'recall':>10} {'iou':>10}")
    for c, m in sorted(semantic.per_class.items()):
        label = names.get(c, str(c))
        print(f"{label:>12} {_fmt(m.precision):>10} {_fmt(m.recall):>10} {_fmt(m.iou):>10}")
    print()
    print("instance segmentation")
    print(
        f"{'class':>12} {'iou_thr':>8} {'precision':>10} {'recall':>10}"
        f" {'tp':>5} {'fp':>5} {'fn':>5}"
    )
    for report in reports:
        for c, row in sorted(report.rows.items()):
            label = names.get(c, str(c))
            print(
                f"{label:>12} {report.threshold:>8.2f} {_fmt(row.precision):>10}"
                f" {_fmt(row.recall):>10} {row.tp:>5} {row.fp:>5} {row.fn:>5}"
            )
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
