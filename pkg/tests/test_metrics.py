"""Semantic metrics, optimal instance matching, and threshold counting."""

import itertools

import numpy as np
import pytest

from lidarseg import instance_pr, match_instances, semantic_metrics


def brute_force_best_total(pred_sets, truth_sets):
    """Oracle: maximum total IoU over every injective same-class assignment."""

    def iou(a, b):
        inter = len(a & b)
        return inter / len(a | b) if inter else 0.0

    classes = {c for c, _ in pred_sets.values()} | {c for c, _ in truth_sets.values()}
    total = 0.0
    for cls in classes:
        p = [s for c, s in pred_sets.values() if c == cls]
        t = [s for c, s in truth_sets.values() if c == cls]
        best = 0.0
        k = min(len(p), len(t))
        for p_subset in itertools.permutations(range(len(p)), k):
            for t_subset in itertools.permutations(range(len(t)), k):
                best = max(best, sum(iou(p[a], t[b]) for a, b in zip(p_subset, t_subset)))
        total += best
    return total


def random_instance_labels(rng, n_points, max_instances, n_classes=2):
    inst = np.zeros(n_points, dtype=np.int64)
    cls = np.zeros(n_points, dtype=np.int64)
    n_inst = int(rng.integers(0, max_instances + 1))
    for m in range(1, n_inst + 1):
        size = int(rng.integers(1, max(2, n_points // 2)))
        idx = rng.choice(n_points, size=size, replace=False)
        inst[idx] = m
        cls[idx] = int(rng.integers(1, n_classes + 1))
    return inst, cls


def to_sets(inst, cls):
    return {
        int(m): (int(cls[inst == m][0]), set(np.nonzero(inst == m)[0].tolist()))
        for m in np.unique(inst)
        if m != 0
    }


class TestSemanticMetrics:
    def test_identity(self):
        labels = np.array([0, 1, 1, 2, 2, 2])
        report = semantic_metrics(labels, labels)
        for c in (1, 2):
            m = report.per_class[c]
            assert m.precision == m.recall == m.iou == 1.0

    def test_disjoint(self):
        pred = np.array([1, 1, 0, 0])
        truth = np.array([0, 0, 1, 1])
        m = semantic_metrics(pred, truth).per_class[1]
        assert m.precision == 0.0 and m.recall == 0.0 and m.iou == 0.0

    def test_hand_counted(self):
        # |P|=10, |G|=8, intersection 6 -> P=0.6, R=0.75, IoU=0.5
        pred = np.zeros(30, dtype=int)
        truth = np.zeros(30, dtype=int)
        pred[:10] = 1
        truth[4:12] = 1
        m = semantic_metrics(pred, truth).per_class[1]
        assert (m.n_pred, m.n_truth, m.n_intersection) == (10, 8, 6)
        assert m.precision == pytest.approx(0.6)
        assert m.recall == pytest.approx(0.75)
        assert m.iou == pytest.approx(0.5)

    def test_undefined_ratios_are_none(self):
        pred = np.array([0, 0])
        truth = np.array([1, 0])
        m = semantic_metrics(pred, truth).per_class[1]
        assert m.precision is None
        assert m.recall == 0.0
        assert m.iou == 0.0
        m2 = semantic_metrics(pred, pred, classes=[1]).per_class[1]
        assert m2.precision is None and m2.recall is None and m2.iou is None

    def test_swap_transposes_precision_recall(self):
        rng = np.random.default_rng(0)
        pred = rng.integers(0, 3, size=200)
        truth = rng.integers(0, 3, size=200)
        a = semantic_metrics(pred, truth)
        b = semantic_metrics(truth, pred)
        for c in a.per_class:
            assert a.per_class[c].precision == b.per_class[c].recall
            assert a.per_class[c].recall == b.per_class[c].precision
            assert a.per_class[c].iou == b.per_class[c].iou

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length"):
            semantic_metrics(np.zeros(3), np.zeros(4))


class TestMatchInstances:
    def test_single_pair(self):
        # 8 of 10 points shared -> IoU 8/12
        pred = np.zeros(14, dtype=int)
        truth = np.zeros(14, dtype=int)
        pred[0:10] = 1
        truth[2:12] = 1
        matches = match_instances(pred, pred.astype(bool) * 5, truth, truth.astype(bool) * 5)
        assert len(matches) == 1
        assert matches[0].iou == pytest.approx(8 / 12)
        assert matches[0].class_id == 5

    def test_class_constrained(self):
        inst = np.array([1, 1, 0])
        matches = match_instances(inst, inst * 2, inst, inst * 3)
        assert matches == []

    def test_zero_iou_never_matched(self):
        pred = np.array([1, 1, 0, 0])
        truth = np.array([0, 0, 1, 1])
        assert match_instances(pred, pred, truth, truth) == []

    def test_mixed_class_instance_rejected(self):
        inst = np.array([1, 1])
        cls = np.array([1, 2])
        with pytest.raises(ValueError, match="multiple classes"):
            match_instances(inst, cls, inst, inst)

    @pytest.mark.parametrize("seed", range(12))
    def test_total_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = 40
        p_inst, p_cls = random_instance_labels(rng, n, max_instances=4)
        t_inst, t_cls = random_instance_labels(rng, n, max_instances=4)
        matches = match_instances(p_inst, p_cls, t_inst, t_cls)
        total = sum(m.iou for m in matches)
        expected = brute_force_best_total(to_sets(p_inst, p_cls), to_sets(t_inst, t_cls))
        assert total == pytest.approx(expected, abs=1e-12)
        assert all(m.iou > 0 for m in matches)
        # one-to-one
        assert len({m.pred_id for m in matches}) == len(matches)
        assert len({m.truth_id for m in matches}) == len(matches)

    def test_deterministic_tie_break_lowest_ids(self):
        pred = np.array([1, 2, 1, 2])
        truth = np.array([1, 2, 2, 1])
        ones = np.ones(4, dtype=int)
        matches = match_instances(pred, ones, truth, ones)
        # every pair has IoU 1/3; lexicographic fixing pairs (1,1) and (2,2)
        assert [(m.pred_id, m.truth_id) for m in matches] == [(1, 1), (2, 2)]

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(77)
        n = 60
        p_inst, p_cls = random_instance_labels(rng, n, max_instances=4)
        t_inst, t_cls = random_instance_labels(rng, n, max_instances=4)
        base = match_instances(p_inst, p_cls, t_inst, t_cls)

        ids = [int(m) for m in np.unique(p_inst) if m != 0]
        perm = {m: ids[(i + 1) % len(ids)] for i, m in enumerate(ids)} if ids else {}
        p_relabel = np.array([perm.get(int(m), 0) for m in p_inst])
        relabeled = match_instances(p_relabel, p_cls, t_inst, t_cls)
        base_pairs = {(perm.get(m.pred_id), m.truth_id, round(m.iou, 12)) for m in base}
        new_pairs = {(m.pred_id, m.truth_id, round(m.iou, 12)) for m in relabeled}
        assert base_pairs == new_pairs


class TestInstancePR:
    def test_perfect_segmentation(self):
        inst = np.array([0, 1, 1, 2])
        cls = np.array([0, 1, 1, 1])
        matches = match_instances(inst, cls, inst, cls)
        for threshold in (0.5, 0.7, 1.0):
            report = instance_pr(matches, {1: 1, 2: 1}, {1: 1, 2: 1}, threshold)
            assert report.rows[1].precision == 1.0
            assert report.rows[1].recall == 1.0

    def test_hand_counted_thresholding(self):
        # matched IoUs 0.8 and 0.6, threshold 0.7, 3 preds vs 2 truths
        from lidarseg.metrics import MatchedPair

        matching = [
            MatchedPair(pred_id=1, truth_id=1, class_id=1, iou=0.8),
            MatchedPair(pred_id=2, truth_id=2, class_id=1, iou=0.6),
        ]
        report = instance_pr(matching, {1: 1, 2: 1, 3: 1}, {1: 1, 2: 1}, 0.7)
        row = report.rows[1]
        assert (row.tp, row.fp, row.fn) == (1, 2, 1)
        assert row.precision == pytest.approx(1 / 3)
        assert row.recall == pytest.approx(1 / 2)

    def test_counts_partition_instances(self):
        rng = np.random.default_rng(5)
        p_inst, p_cls = random_instance_labels(rng, 50, max_instances=5)
        t_inst, t_cls = random_instance_labels(rng, 50, max_instances=5)
        matches = match_instances(p_inst, p_cls, t_inst, t_cls)
        preds = {m: c for m, (c, _) in to_sets(p_inst, p_cls).items()}
        truths = {m: c for m, (c, _) in to_sets(t_inst, t_cls).items()}
        report = instance_pr(matches, preds, truths, 0.5)
        for cls, row in report.rows.items():
            assert row.tp + row.fp == sum(1 for c in preds.values() if c == cls)
            assert row.tp + row.fn == sum(1 for c in truths.values() if c == cls)

    def test_threshold_monotonicity(self):
        rng = np.random.default_rng(6)
        p_inst, p_cls = random_instance_labels(rng, 80, max_instances=5)
        t_inst, t_cls = random_instance_labels(rng, 80, max_instances=5)
        matches = match_instances(p_inst, p_cls, t_inst, t_cls)
        preds = {m: c for m, (c, _) in to_sets(p_inst, p_cls).items()}
        truths = {m: c for m, (c, _) in to_sets(t_inst, t_cls).items()}
        last_tp = {c: np.inf for c in set(preds.values()) | set(truths.values())}
        for threshold in (0.05, 0.25, 0.5, 0.75, 0.95, 1.0):
            report = instance_pr(matches, preds, truths, threshold)
            for cls, row in report.rows.items():
                assert row.tp <= last_tp[cls]
                last_tp[cls] = row.tp

    def test_empty_sides_give_none(self):
        report = instance_pr([], {}, {1: 1}, 0.5)
        assert report.rows[1].precision is None
        assert report.rows[1].recall == 0.0

    def test_threshold_validated(self):
        with pytest.raises(ValueError, match="threshold"):
            instance_pr([], {}, {}, 0.0)

    def test_matcher_iou_consistent_with_point_sets(self):
        rng = np.random.default_rng(8)
        p_inst, p_cls = random_instance_labels(rng, 70, max_instances=4)
        t_inst, t_cls = random_instance_labels(rng, 70, max_instances=4)
        matches = match_instances(p_inst, p_cls, t_inst, t_cls)
        p_sets = to_sets(p_inst, p_cls)
        t_sets = to_sets(t_inst, t_cls)
        for m in matches:
            a = p_sets[m.pred_id][1]
            b = t_sets[m.truth_id][1]
            assert m.iou == pytest.approx(len(a & b) / len(a | b), abs=1e-15)
