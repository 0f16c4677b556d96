"""Outlier removal: keep each instance's largest connected component.

Projection and mask-boundary errors can leave small disjoint islands of
points carrying an object label. For every instance, the neighbor graph is
restricted to that instance's points, treated as undirected (an edge exists
if either endpoint lists the other as a neighbor), and everything outside the
largest connected component is relabeled background. Connectivity uses the
sparsity pattern only; weights are ignored.
"""

from __future__ import annotations

import numpy as np

from .graph import KnnSubgraph
from .model import InstanceRecord, SegmentationResult

__all__ = ["UnionFind", "remove_outliers"]


class UnionFind:
    """Disjoint sets over 0..n-1 with path compression and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:  # compress the walked path
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def remove_outliers(
    labels: SegmentationResult, knn: KnnSubgraph, fov: np.ndarray
) -> SegmentationResult:
    """Relabel points outside each instance's largest component to background.

    ``fov`` maps neighbor-graph rows to full-cloud point indices; the labels
    must have been produced over the same in-view subset the graph was built
    on. Background points are never touched, and equal-size component ties
    keep the component containing the smallest point index.
    """
    fov = np.asarray(fov, dtype=np.int64)
    if len(fov) != knn.n:
        raise ValueError(f"graph has {knn.n} rows but fov lists {len(fov)} points")
    if fov.size and (fov.min() < 0 or fov.max() >= len(labels)):
        raise ValueError(f"fov indices exceed the {len(labels)}-point label array")

    y = labels.instance_ids.copy()
    y_fov = y[fov]
    indptr = knn.matrix.indptr
    indices = knn.matrix.indices

    for m in np.unique(y_fov):
        if m == 0:
            continue
        members = np.nonzero(y_fov == m)[0]
        in_instance = np.zeros(knn.n, dtype=bool)
        in_instance[members] = True

        uf = UnionFind(knn.n)
        for i in members:
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j != i and in_instance[j]:
                    uf.union(int(i), int(j))

        stats: dict[int, tuple[int, int]] = {}  # root -> (size, smallest node)
        for i in members:
            root = uf.find(int(i))
            count, lowest = stats.get(root, (0, int(i)))
            stats[root] = (count + 1, min(lowest, int(i)))
        best_root = max(stats, key=lambda r: (stats[r][0], -stats[r][1]))

        drop = np.array([i for i in members if uf.find(int(i)) != best_root], dtype=np.int64)
        if drop.size:
            y[fov[drop]] = 0

    class_lookup = np.zeros(max(labels.instance_table, default=0) + 1, dtype=np.int64)
    names = {}
    for inst_id, rec in labels.instance_table.items():
        class_lookup[inst_id] = rec.class_id
        names[inst_id] = rec.class_name
    class_ids = class_lookup[y]

    table = {}
    for inst_id in sorted(labels.instance_table):
        count = int((y == inst_id).sum())
        if count:
            rec = labels.instance_table[inst_id]
            table[inst_id] = InstanceRecord(
                class_id=rec.class_id, class_name=rec.class_name, point_count=count
            )
    return SegmentationResult(
        instance_ids=y,
        class_ids=class_ids,
        instance_table=table,
        iterations_run=labels.iterations_run,
        converged=labels.converged,
        points_in_fov=labels.points_in_fov,
    )
