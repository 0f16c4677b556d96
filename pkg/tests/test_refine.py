"""Outlier removal against an exhaustive depth-first-search oracle."""

import numpy as np
import pytest

from lidarseg import (
    InstanceRecord,
    SegmentationResult,
    build_knn_subgraph,
    remove_outliers,
)
from lidarseg.refine import UnionFind


def make_result(instance_ids, class_of=None, n_total=None, fov=None):
    instance_ids = np.asarray(instance_ids, dtype=np.int64)
    if fov is None:
        fov = np.arange(len(instance_ids))
    if n_total is None:
        n_total = len(instance_ids)
    full = np.zeros(n_total, dtype=np.int64)
    full[fov] = instance_ids
    class_of = class_of or {}
    table = {}
    class_ids = np.zeros(n_total, dtype=np.int64)
    for m in np.unique(full[full != 0]):
        cls = class_of.get(int(m), int(m))
        table[int(m)] = InstanceRecord(cls, f"class{cls}", int((full == m).sum()))
        class_ids[full == m] = cls
    return (
        SegmentationResult(
            instance_ids=full, class_ids=class_ids, instance_table=table,
            points_in_fov=len(fov),
        ),
        np.asarray(fov, dtype=np.int64),
    )


def dfs_outlier_removal(labels_fov, knn):
    """Oracle: explicit adjacency sets + stack DFS, same tie rule."""
    n = knn.n
    adjacency = [set() for _ in range(n)]
    m = knn.matrix
    for i in range(n):
        for j in m.indices[m.indptr[i] : m.indptr[i + 1]]:
            if j != i:
                adjacency[i].add(int(j))
                adjacency[int(j)].add(i)

    out = labels_fov.copy()
    for label in np.unique(labels_fov):
        if label == 0:
            continue
        members = set(np.nonzero(labels_fov == label)[0].tolist())
        seen = set()
        components = []
        for start in sorted(members):
            if start in seen:
                continue
            stack = [start]
            component = set()
            while stack:
                node = stack.pop()
                if node in component:
                    continue
                component.add(node)
                stack.extend(x for x in adjacency[node] if x in members and x not in component)
            seen |= component
            components.append(component)
        # largest component; ties keep the one with the smallest point index
        best = max(components, key=lambda c: (len(c), -min(c)))
        for i in members - best:
            out[i] = 0
    return out


class TestUnionFind:
    def test_basic_merging(self):
        uf = UnionFind(5)
        uf.union(0, 1)
        uf.union(3, 4)
        assert uf.find(0) == uf.find(1)
        assert uf.find(3) == uf.find(4)
        assert uf.find(0) != uf.find(3)
        uf.union(1, 3)
        assert uf.find(0) == uf.find(4)

    def test_reflexive_union_noop(self):
        uf = UnionFind(2)
        uf.union(0, 0)
        assert uf.find(0) != uf.find(1)


class TestRemoveOutliers:
    def chain(self, n, spacing=0.5):
        return np.column_stack([np.arange(n) * spacing, np.zeros(n), np.full(n, 5.0)])

    def test_single_component_unchanged(self):
        pts = self.chain(9)
        knn = build_knn_subgraph(pts, k=2, sigma=1.0)
        result, fov = make_result([1] * 9)
        out = remove_outliers(result, knn, fov)
        np.testing.assert_array_equal(out.instance_ids, result.instance_ids)

    def test_small_component_dropped(self):
        # 7-chain and a far 2-chain, all one instance: k=1 edges stay local
        pts = np.vstack([self.chain(7), self.chain(2) + [100.0, 0, 0]])
        knn = build_knn_subgraph(pts, k=1, sigma=1.0)
        result, fov = make_result([1] * 9)
        out = remove_outliers(result, knn, fov)
        np.testing.assert_array_equal(out.instance_ids[:7], 1)
        np.testing.assert_array_equal(out.instance_ids[7:], 0)
        assert out.instance_table[1].point_count == 7

    def test_equal_components_keep_lowest_index(self):
        pts = np.vstack([self.chain(3), self.chain(3) + [50.0, 0, 0]])
        knn = build_knn_subgraph(pts, k=1, sigma=1.0)
        result, fov = make_result([1] * 6)
        out = remove_outliers(result, knn, fov)
        np.testing.assert_array_equal(out.instance_ids, [1, 1, 1, 0, 0, 0])

    def test_background_untouched_and_no_label_gains(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(80, 3)) * 3
        knn = build_knn_subgraph(pts, k=3, sigma=1.0)
        labels = rng.integers(0, 4, size=80)
        result, fov = make_result(labels)
        out = remove_outliers(result, knn, fov)
        changed = out.instance_ids != result.instance_ids
        assert (out.instance_ids[changed] == 0).all()  # only demotions
        np.testing.assert_array_equal(
            out.instance_ids[result.instance_ids == 0], 0
        )

    def test_out_of_view_points_preserved(self):
        pts = self.chain(4)
        knn = build_knn_subgraph(pts, k=1, sigma=1.0)
        result, fov = make_result([1, 1, 2, 2], n_total=6, fov=[0, 2, 3, 5])
        out = remove_outliers(result, knn, fov)
        assert len(out) == 6
        assert out.instance_ids[1] == 0 and out.instance_ids[4] == 0

    def test_fov_length_checked(self):
        knn = build_knn_subgraph(self.chain(3), k=1, sigma=1.0)
        result, _ = make_result([1, 1])
        with pytest.raises(ValueError, match="fov"):
            remove_outliers(result, knn, np.array([0, 1]))
        with pytest.raises(ValueError, match="exceed"):
            remove_outliers(result, knn, np.array([0, 1, 2]))

    @pytest.mark.parametrize("seed", range(6))
    def test_matches_dfs_oracle(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 300))
        pts = rng.normal(size=(n, 3)) * rng.uniform(0.5, 4.0)
        knn = build_knn_subgraph(pts, k=int(rng.integers(1, 6)), sigma=1.0)
        labels = rng.integers(0, 5, size=n)
        result, fov = make_result(labels)
        out = remove_outliers(result, knn, fov)
        expected = dfs_outlier_removal(labels, knn)
        np.testing.assert_array_equal(out.instance_ids, expected)

    @pytest.mark.parametrize("seed", range(3))
    def test_idempotent(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = 150
        pts = rng.normal(size=(n, 3)) * 2
        knn = build_knn_subgraph(pts, k=2, sigma=1.0)
        result, fov = make_result(rng.integers(0, 4, size=n))
        once = remove_outliers(result, knn, fov)
        twice = remove_outliers(once, knn, fov)
        np.testing.assert_array_equal(once.instance_ids, twice.instance_ids)
        assert once.instance_table == twice.instance_table
