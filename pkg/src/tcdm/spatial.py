"""Deterministic k-nearest-neighbor queries and seed sampling over 3D points.

Every query resolves exact distance ties by the same rule: ascending
(distance, lexicographic position (x, y, z), original index). The index
keeps its points sorted in that lexicographic order so a single stable sort
of squared distances realizes the full composite ordering.

Squared distances are always accumulated coordinate by coordinate,
``(dx*dx + dy*dy) + dz*dz``, which is bitwise-identical to the naive
per-pair ``((a - b) ** 2).sum()`` an exhaustive oracle would use. Faster
formulations (gram-matrix tricks) round differently and would break exact
tie agreement, so they are deliberately avoided.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SpatialIndex",
    "NeighborList",
    "build_index",
    "knn",
    "knn_batch",
    "farthest_point_sampling",
    "random_sampling",
]

# Extra candidates fetched beyond k; rows whose boundary remains ambiguous
# (ties reaching past the buffer) fall back to a full stable sort.
_TOPK_BUFFER = 8


@dataclass(frozen=True)
class NeighborList:
    """knn result: indices with matching nondecreasing distances."""

    indices: np.ndarray
    distances: np.ndarray


class SpatialIndex:
    """Immutable brute-force index with contract-exact tie ordering."""

    def __init__(self, positions: np.ndarray):
        positions = np.ascontiguousarray(positions, dtype=np.float64)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ValueError(f"positions must be (N, 3), got {positions.shape}")
        if positions.shape[0] < 1:
            raise ValueError("cannot index an empty point set")
        if not np.isfinite(positions).all():
            raise ValueError("positions contain non-finite values")
        self.positions = positions
        n = positions.shape[0]
        # order: points sorted by (x, y, z, original index); rank inverts it.
        self.order = np.lexsort((np.arange(n), positions[:, 2], positions[:, 1], positions[:, 0]))
        self.rank = np.empty(n, dtype=np.intp)
        self.rank[self.order] = np.arange(n)
        sorted_pts = positions[self.order]
        self._cols = (sorted_pts[:, 0].copy(), sorted_pts[:, 1].copy(), sorted_pts[:, 2].copy())

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    def sq_dists(self, queries: np.ndarray) -> np.ndarray:
        """Squared distances from each query to every indexed point (rank order)."""
        cx, cy, cz = self._cols
        d2 = np.subtract.outer(queries[:, 0], cx)
        d2 *= d2
        t = np.subtract.outer(queries[:, 1], cy)
        t *= t
        d2 += t
        t = np.subtract.outer(queries[:, 2], cz)
        t *= t
        d2 += t
        return d2


def build_index(positions) -> SpatialIndex:
    return SpatialIndex(np.asarray(positions, dtype=np.float64))


def _topk_sorted(d2: np.ndarray, k: int) -> np.ndarray:
    """Per-row indices of the k smallest entries, ties by column order.

    Columns are assumed pre-sorted by the tie-break rank, so a stable sort
    on values alone realizes the composite (value, rank) ordering.
    """
    n_rows, m = d2.shape
    kk = min(k, m)
    if kk == m:
        return np.argsort(d2, axis=1, kind="stable")
    w = min(kk + _TOPK_BUFFER, m)
    part = np.argpartition(d2, w - 1, axis=1)[:, :w]
    vals = np.take_along_axis(d2, part, axis=1)
    sub = np.lexsort((part, vals), axis=1)
    part = np.take_along_axis(part, sub, axis=1)
    vals = np.take_along_axis(vals, sub, axis=1)
    if w < m:
        # Boundary tie: a value equal to the kk-th may also live outside the
        # candidate window; redo those rows with a full stable sort.
        unsafe = vals[:, w - 1] <= vals[:, kk - 1]
        if unsafe.any():
            rows = np.flatnonzero(unsafe)
            full = np.argsort(d2[rows], axis=1, kind="stable")[:, :w]
            part[rows] = full
    return part[:, :kk]


def knn_batch(index: SpatialIndex, queries: np.ndarray, k: int,
              exclude: np.ndarray | None = None):
    """Vectorized knn for many queries.

    Returns (indices, distances) of shape (Q, min(k, N)) in original point
    numbering. When ``exclude`` names a point per row, that point never
    appears; rows where fewer than k candidates remain carry trailing
    entries with infinite distance (callers own any padding policy).
    """
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    if queries.ndim != 2 or queries.shape[1] != 3:
        raise ValueError(f"queries must be (Q, 3), got {queries.shape}")
    if k < 1:
        raise ValueError("k must be >= 1")
    d2 = index.sq_dists(queries)
    if exclude is not None:
        exclude = np.asarray(exclude)
        rows = np.flatnonzero(exclude >= 0)
        d2[rows, index.rank[exclude[rows]]] = np.inf
    sel = _topk_sorted(d2, k)
    dists = np.sqrt(np.take_along_axis(d2, sel, axis=1))
    return index.order[sel], dists


def knn(index: SpatialIndex, query, k: int, exclude: int | None = None) -> NeighborList:
    """Nearest neighbors of one query point under the tie-break contract."""
    query = np.asarray(query, dtype=np.float64).reshape(1, 3)
    excl = None if exclude is None else np.asarray([exclude])
    idx, dist = knn_batch(index, query, k, exclude=excl)
    valid = np.isfinite(dist[0])
    return NeighborList(idx[0][valid].copy(), dist[0][valid].copy())


def farthest_point_sampling(positions, count: int) -> np.ndarray:
    """Greedy max-min sampling of ``count`` point indices.

    The first pick is the point farthest from the coordinate centroid; each
    later pick maximizes the minimum distance to the picks so far. Ties go
    to the lexicographically smallest position, which makes the selected
    coordinate set independent of input ordering for distinct points.
    """
    index = build_index(positions)
    n = index.count
    if not (1 <= count <= n):
        raise ValueError(f"sample count must be in [1, {n}], got {count}")
    cx, cy, cz = index._cols
    # Centroid over rank-ordered coordinates: permutation-stable summation.
    d2 = cx - cx.mean()
    d2 *= d2
    t = cy - cy.mean()
    t *= t
    d2 += t
    t = cz - cz.mean()
    t *= t
    d2 += t
    picked = np.empty(count, dtype=np.intp)
    current = int(np.argmax(d2))
    picked[0] = current
    min_d2 = np.full(n, np.inf)
    for i in range(1, count):
        d2 = cx - cx[current]
        d2 *= d2
        t = cy - cy[current]
        t *= t
        d2 += t
        t = cz - cz[current]
        t *= t
        d2 += t
        np.minimum(min_d2, d2, out=min_d2)
        min_d2[current] = -1.0  # never re-pick, even among exact duplicates
        current = int(np.argmax(min_d2))
        picked[i] = current
    min_d2[current] = -1.0
    return index.order[picked]


def random_sampling(positions, count: int, rng_seed: int) -> np.ndarray:
    """Uniformly random distinct indices, reproducible from the seed."""
    positions = np.asarray(positions, dtype=np.float64)
    n = positions.shape[0]
    if not (1 <= count <= n):
        raise ValueError(f"sample count must be in [1, {n}], got {count}")
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    return rng.choice(n, size=count, replace=False)
