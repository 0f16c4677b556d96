"""Sparse diffusion-graph construction over in-view points and image pixels.

Two subgraphs are built and then jointly row-normalized:

* a point-to-point block: each point keeps a unit self-weight and couples to
  its K nearest Euclidean neighbors with weight exp(-d^2 / sigma);
* a pixel-to-point block: each point couples with a small constant weight to
  every pixel in an odd square window around its rounded projection, clipped
  at the image border.

Pixels act as fixed label sources, so the pixel rows of the full graph (an
identity block) never need to be materialized: the iteration treats pixel
labels as constants, which is algebraically identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .model import ProjectedPoints, round_half_away

__all__ = [
    "KnnSubgraph",
    "PixelSubgraph",
    "DiffusionGraph",
    "build_knn_subgraph",
    "build_pixel_subgraph",
    "assemble_normalized",
]


@dataclass(frozen=True)
class KnnSubgraph:
    """Unnormalized point-to-point weights in CSR form.

    Every row holds a unit diagonal entry plus at most K neighbor entries,
    all strictly positive.
    """

    n: int
    matrix: sp.csr_matrix


@dataclass(frozen=True)
class PixelSubgraph:
    """Unnormalized point-to-pixel weights in CSR form.

    Pixel columns are indexed row-major (j = v * width + u). Every stored
    weight equals the coupling constant exactly.
    """

    n: int
    n_pixels: int
    matrix: sp.csr_matrix


@dataclass(frozen=True)
class DiffusionGraph:
    """Jointly row-normalized graph split into its two point-row blocks.

    ``A`` couples points to points, ``B`` couples pixels to points; for every
    row, sum(A row) + sum(B row) == 1.
    """

    n: int
    n_pixels: int
    A: sp.csr_matrix
    B: sp.csr_matrix


def _exact_knn(points: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """K nearest distinct neighbors per point, exact, ties broken by index.

    Returns flat COO-style (rows, cols, squared distances). Candidates come
    from a KD-tree; squared distances are recomputed from coordinates so that
    ordering decisions never depend on the tree's internal arithmetic. Rows
    whose k-th neighbor distance is tied with dropped candidates are resolved
    by a closed ball query.
    """
    n = len(points)
    k_eff = min(k, n - 1)
    if k_eff == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty(0, dtype=np.float64)

    tree = cKDTree(points)
    # The window is larger than k+1 (self plus neighbors) so that small tie
    # groups at the cut, common on gridded clouds, resolve without a second
    # query; the ambiguity check below catches anything bigger.
    m = min(n, k_eff + 5)
    _, cand = tree.query(points, k=m)
    cand = cand.reshape(n, m)

    diffs = points[cand] - points[:, None, :]
    d2 = np.einsum("ijk,ijk->ij", diffs, diffs)

    # Row-wise sort by (squared distance, index) in one flat lexsort.
    row_ids = np.repeat(np.arange(n), m)
    order = np.lexsort((cand.ravel(), d2.ravel(), row_ids))
    cand_sorted = cand.ravel()[order].reshape(n, m)
    d2_sorted = d2.ravel()[order].reshape(n, m)

    not_self = cand_sorted != np.arange(n)[:, None]
    rank = np.cumsum(not_self, axis=1)
    keep = not_self & (rank <= k_eff)

    rows = np.repeat(np.arange(n), keep.sum(axis=1))
    cols = cand_sorted[keep]
    dist2 = d2_sorted[keep]

    # A row is ambiguous when the first dropped candidate ties the last kept
    # one: the fetched window may then have cut through a group of ties.
    if m < n:
        kth = np.where(rank == k_eff, d2_sorted, -np.inf).max(axis=1)
        beyond = np.where(not_self & (rank == k_eff + 1), d2_sorted, np.inf).min(axis=1)
        ambiguous = np.nonzero(beyond <= kth)[0]
        if ambiguous.size:
            keep_rows = ~np.isin(rows, ambiguous)
            fixed_rows = [rows[keep_rows]]
            fixed_cols = [cols[keep_rows]]
            fixed_d2 = [dist2[keep_rows]]
            radii = np.sqrt(kth[ambiguous]) * (1 + 1e-9) + 1e-12
            balls = tree.query_ball_point(points[ambiguous], r=radii)
            for i, ball in zip(ambiguous, balls):
                cand_i = np.array([j for j in ball if j != i], dtype=np.int64)
                d2_i = ((points[cand_i] - points[i]) ** 2).sum(axis=1)
                sel = np.lexsort((cand_i, d2_i))[:k_eff]
                fixed_rows.append(np.full(len(sel), i, dtype=np.int64))
                fixed_cols.append(cand_i[sel])
                fixed_d2.append(d2_i[sel])
            rows = np.concatenate(fixed_rows)
            cols = np.concatenate(fixed_cols)
            dist2 = np.concatenate(fixed_d2)

    return rows.astype(np.int64), cols.astype(np.int64), dist2


def build_knn_subgraph(points, k: int, sigma: float) -> KnnSubgraph:
    """Exponential-weighted exact K-nearest-neighbor graph with unit diagonal.

    Off-diagonal weights are exp(-||x_i - x_j||^2 / sigma) over the k nearest
    distinct points (fewer when the cloud is smaller); distance ties break to
    the lower point index. Duplicate points are legal and get weight 1.
    Entries that underflow to exactly zero are dropped.
    """
    pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
    if pts.ndim != 2 or (pts.size and pts.shape[1] != 3):
        raise ValueError(f"points must have shape (N, 3), got {pts.shape}")
    n = pts.shape[0]
    if n == 0:
        raise ValueError("cannot build a neighbor graph over an empty point set")
    if k < 1:
        raise ValueError("k must be a positive integer")
    if sigma <= 0:
        raise ValueError("sigma must be positive")

    rows, cols, d2 = _exact_knn(pts, k)
    weights = np.exp(-d2 / sigma)
    nonzero = weights > 0.0
    rows, cols, weights = rows[nonzero], cols[nonzero], weights[nonzero]

    diag = np.arange(n, dtype=np.int64)
    all_rows = np.concatenate([diag, rows])
    all_cols = np.concatenate([diag, cols])
    all_data = np.concatenate([np.ones(n), weights])
    matrix = sp.coo_matrix((all_data, (all_rows, all_cols)), shape=(n, n)).tocsr()
    matrix.sort_indices()
    return KnnSubgraph(n=n, matrix=matrix)


def build_pixel_subgraph(
    projected: ProjectedPoints,
    fov: np.ndarray,
    width: int,
    height: int,
    box_size: int,
    pixel_weight: float,
) -> PixelSubgraph:
    """Constant-weight links from each in-view point to its pixel window.

    Row i couples the i-th in-view point to every pixel of the box_size x
    box_size window centered on its rounded projection, intersected with the
    image rectangle.
    """
    if box_size < 1 or box_size % 2 == 0:
        raise ValueError(f"box_size must be odd and positive, got {box_size}")
    if pixel_weight <= 0:
        raise ValueError("pixel_weight must be positive")

    fov = np.asarray(fov, dtype=np.int64)
    cu = round_half_away(np.asarray(projected.u)[fov])
    cv = round_half_away(np.asarray(projected.v)[fov])
    outside = (cu < 0) | (cu >= width) | (cv < 0) | (cv >= height)
    if outside.any():
        bad = int(np.nonzero(outside)[0][0])
        raise ValueError(
            f"in-view point {int(fov[bad])} rounds to pixel "
            f"({int(cu[bad])}, {int(cv[bad])}) outside the {width}x{height} image; "
            f"projection bookkeeping is inconsistent"
        )

    n = len(fov)
    half = box_size // 2
    offsets = np.arange(-half, half + 1, dtype=np.int64)
    us = cu[:, None, None] + offsets[None, None, :]  # (n, 1, box)
    vs = cv[:, None, None] + offsets[None, :, None]  # (n, box, 1)
    us, vs = np.broadcast_arrays(us, vs)
    valid = (us >= 0) & (us < width) & (vs >= 0) & (vs < height)

    rows = np.broadcast_to(np.arange(n, dtype=np.int64)[:, None, None], valid.shape)
    cols = vs * width + us
    data = np.full(int(valid.sum()), pixel_weight, dtype=np.float64)
    matrix = sp.coo_matrix(
        (data, (rows[valid], cols[valid])), shape=(n, width * height)
    ).tocsr()
    matrix.sort_indices()
    return PixelSubgraph(n=n, n_pixels=width * height, matrix=matrix)


def assemble_normalized(knn: KnnSubgraph, pix: PixelSubgraph) -> DiffusionGraph:
    """Row-normalize the concatenated [point-block | pixel-block] weights.

    Each point row is divided by its total weight across both blocks, so the
    blocks jointly form a row-stochastic matrix. The unit diagonal guarantees
    every divisor is >= 1.
    """
    if knn.n != pix.n:
        raise ValueError(f"block row counts disagree: {knn.n} vs {pix.n}")
    knn_sums = np.asarray(knn.matrix.sum(axis=1)).ravel()
    pix_sums = np.asarray(pix.matrix.sum(axis=1)).ravel()
    totals = knn_sums + pix_sums
    if (totals <= 0).any():
        bad = int(np.nonzero(totals <= 0)[0][0])
        raise ValueError(f"row {bad} has zero total weight and cannot be normalized")

    def scale(matrix: sp.csr_matrix) -> sp.csr_matrix:
        scaled = matrix.copy()
        per_entry = np.repeat(totals, np.diff(matrix.indptr))
        scaled.data = matrix.data / per_entry
        return scaled

    return DiffusionGraph(
        n=knn.n, n_pixels=pix.n_pixels, A=scale(knn.matrix), B=scale(pix.matrix)
    )
