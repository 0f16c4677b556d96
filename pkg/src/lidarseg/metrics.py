"""Evaluation metrics: per-class point metrics and instance-level matching.

Semantic metrics compare per-point class labels with set-cardinality
precision / recall / IoU. Instance metrics first match predicted to ground
truth instances of the same class one-to-one, maximizing total point-set IoU
exactly, then count true/false positives and negatives at an IoU threshold.
Undefined ratios (empty denominators) are reported as ``None``, never
collapsed to 0 or 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = [
    "ClassMetrics",
    "SemanticReport",
    "MatchedPair",
    "InstancePRRow",
    "InstanceReport",
    "semantic_metrics",
    "match_instances",
    "instance_pr",
]

# Slack for comparing floating-point matching totals during tie resolution.
_TOTAL_EPS = 1e-9


@dataclass(frozen=True)
class ClassMetrics:
    """Point-level precision / recall / IoU for one class."""

    class_id: int
    n_pred: int
    n_truth: int
    n_intersection: int
    precision: float | None
    recall: float | None
    iou: float | None


@dataclass(frozen=True)
class SemanticReport:
    """Per-class point metrics, keyed by class id."""

    per_class: dict[int, ClassMetrics]


@dataclass(frozen=True)
class MatchedPair:
    """One matched (prediction, truth) instance pair and its point IoU."""

    pred_id: int
    truth_id: int
    class_id: int
    iou: float


@dataclass(frozen=True)
class InstancePRRow:
    """Instance counts and ratios for one class at one IoU threshold."""

    class_id: int
    threshold: float
    tp: int
    fp: int
    fn: int
    precision: float | None
    recall: float | None


@dataclass(frozen=True)
class InstanceReport:
    """Instance-level precision/recall per class at a single threshold."""

    threshold: float
    rows: dict[int, InstancePRRow]
    matching: tuple[MatchedPair, ...]


def semantic_metrics(pred, truth, classes=None) -> SemanticReport:
    """Set-cardinality precision, recall, and IoU per class.

    ``classes`` defaults to every nonzero class id present on either side.
    A class with no predicted points has undefined precision; one with no
    truth points has undefined recall; IoU is undefined only when both sides
    are empty.
    """
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    truth = np.asarray(truth, dtype=np.int64).reshape(-1)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: pred {pred.shape[0]} vs truth {truth.shape[0]}")
    if classes is None:
        present = np.union1d(np.unique(pred), np.unique(truth))
        classes = [int(c) for c in present if c != 0]

    per_class = {}
    for c in sorted(int(c) for c in classes):
        p = pred == c
        g = truth == c
        n_pred = int(p.sum())
        n_truth = int(g.sum())
        inter = int((p & g).sum())
        union = n_pred + n_truth - inter
        per_class[c] = ClassMetrics(
            class_id=c,
            n_pred=n_pred,
            n_truth=n_truth,
            n_intersection=inter,
            precision=inter / n_pred if n_pred else None,
            recall=inter / n_truth if n_truth else None,
            iou=inter / union if union else None,
        )
    return SemanticReport(per_class=per_class)


def _instance_point_sets(instance_ids, class_ids):
    """Map instance id -> (class id, point index set); validates uniqueness."""
    instance_ids = np.asarray(instance_ids, dtype=np.int64).reshape(-1)
    class_ids = np.asarray(class_ids, dtype=np.int64).reshape(-1)
    if instance_ids.shape != class_ids.shape:
        raise ValueError("instance and class arrays must share one length")
    out: dict[int, tuple[int, np.ndarray]] = {}
    for inst in np.unique(instance_ids):
        if inst == 0:
            continue
        where = np.nonzero(instance_ids == inst)[0]
        cls = np.unique(class_ids[where])
        if len(cls) != 1:
            raise ValueError(f"instance {int(inst)} spans multiple classes: {cls.tolist()}")
        out[int(inst)] = (int(cls[0]), where)
    return out


def _pair_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = np.intersect1d(a, b, assume_unique=True).size
    if inter == 0:
        return 0.0
    return inter / (a.size + b.size - inter)


def _optimal_total(iou: np.ndarray) -> float:
    if iou.size == 0:
        return 0.0
    r, c = linear_sum_assignment(iou, maximize=True)
    return float(iou[r, c].sum())


def match_instances(
    pred_instance_ids, pred_class_ids, truth_instance_ids, truth_class_ids
) -> list[MatchedPair]:
    """One-to-one instance matching maximizing total point-set IoU.

    Only same-class pairs are considered and zero-IoU pairs are never
    matched. Among matchings with equal total IoU, pairs are fixed greedily
    in ascending (pred id, truth id) order, keeping only fixes that still
    admit an optimal completion; this makes the result deterministic.
    """
    preds = _instance_point_sets(pred_instance_ids, pred_class_ids)
    truths = _instance_point_sets(truth_instance_ids, truth_class_ids)

    matches: list[MatchedPair] = []
    classes = sorted({c for c, _ in preds.values()} | {c for c, _ in truths.values()})
    for cls in classes:
        p_ids = sorted(i for i, (c, _) in preds.items() if c == cls)
        t_ids = sorted(i for i, (c, _) in truths.items() if c == cls)
        if not p_ids or not t_ids:
            continue
        iou = np.zeros((len(p_ids), len(t_ids)))
        for a, pid in enumerate(p_ids):
            for b, tid in enumerate(t_ids):
                iou[a, b] = _pair_iou(preds[pid][1], truths[tid][1])

        target = _optimal_total(iou)
        fixed_total = 0.0
        free_rows = list(range(len(p_ids)))
        free_cols = list(range(len(t_ids)))
        for a in range(len(p_ids)):
            free_rows.remove(a)
            chosen = None
            for b in list(free_cols):
                if iou[a, b] <= 0.0:
                    continue
                remainder = _optimal_total(iou[np.ix_(free_rows, [c for c in free_cols if c != b])])
                if fixed_total + iou[a, b] + remainder >= target - _TOTAL_EPS:
                    chosen = b
                    break
            if chosen is not None:
                free_cols.remove(chosen)
                fixed_total += iou[a, chosen]
                matches.append(
                    MatchedPair(
                        pred_id=p_ids[a],
                        truth_id=t_ids[chosen],
                        class_id=cls,
                        iou=float(iou[a, chosen]),
                    )
                )
    return matches


def instance_pr(
    matching: list[MatchedPair],
    pred_instances: dict[int, int],
    truth_instances: dict[int, int],
    iou_threshold: float,
) -> InstanceReport:
    """Count TP/FP/FN and compute precision/recall at one IoU threshold.

    ``pred_instances`` and ``truth_instances`` map instance ids to class ids.
    A matched pair counts as a true positive only when its IoU reaches the
    threshold; everything unmatched-or-below contributes FP (prediction side)
    or FN (truth side).
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in (0, 1], got {iou_threshold}")

    hit_preds = {m.pred_id for m in matching if m.iou >= iou_threshold}
    hit_truths = {m.truth_id for m in matching if m.iou >= iou_threshold}

    classes = sorted(set(pred_instances.values()) | set(truth_instances.values()))
    rows = {}
    for cls in classes:
        p_ids = [i for i, c in pred_instances.items() if c == cls]
        t_ids = [i for i, c in truth_instances.items() if c == cls]
        tp = sum(1 for i in p_ids if i in hit_preds)
        fp = len(p_ids) - tp
        fn = len(t_ids) - sum(1 for i in t_ids if i in hit_truths)
        rows[cls] = InstancePRRow(
            class_id=cls,
            threshold=iou_threshold,
            tp=tp,
            fp=fp,
            fn=fn,
            precision=tp / (tp + fp) if tp + fp else None,
            recall=tp / (tp + fn) if tp + fn else None,
        )
    return InstanceReport(threshold=iou_threshold, rows=rows, matching=tuple(matching))
