"""Adjacency graphs over points and superpoints.

Edges are undirected, stored once as (u, v) with u < v, sorted
lexicographically so two constructions of the same graph compare
bit-exactly.
"""

from __future__ import annotations

import io as _io
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DataError, ParameterError


@dataclass(frozen=True)
class AdjacencyGraph:
    """Symmetric weighted graph in canonical edge-list form.

    weight carries the cut costs w_{u,v}; agreement optionally carries the
    per-edge object agreement in [0, 1]; crossings optionally counts the
    point edges collapsed into a superpoint edge.
    """

    node_count: int
    edges: np.ndarray
    weight: np.ndarray
    agreement: np.ndarray | None = None
    crossings: np.ndarray | None = None

    def __post_init__(self):
        edges = np.ascontiguousarray(np.asarray(self.edges, dtype=np.int64))
        if edges.size == 0:
            edges = edges.reshape(0, 2)
        if edges.ndim != 2 or edges.shape[1] != 2:
            raise DataError(f"edges must be E x 2, got shape {edges.shape}")
        if self.node_count < 0:
            raise DataError("node_count must be nonnegative")
        if len(edges):
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise DataError("edges must satisfy u < v (no self-loops)")
            if edges.min() < 0 or edges.max() >= self.node_count:
                raise DataError("edge endpoints out of range")
            order = np.lexsort((edges[:, 1], edges[:, 0]))
            if not np.array_equal(order, np.arange(len(edges))):
                raise DataError("edges must be sorted by (u, v)")
            if np.any(np.all(np.diff(edges, axis=0) == 0, axis=1)):
                raise DataError("duplicate edges")
        w = np.ascontiguousarray(np.asarray(self.weight, dtype=np.float64))
        if w.shape != (len(edges),):
            raise DataError("weight must have one entry per edge")
        if len(w) and (not np.all(np.isfinite(w)) or np.any(w < 0)):
            raise DataError("weights must be finite and nonnegative")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weight", w)
        for name in ("agreement", "crossings"):
            v = getattr(self, name)
            if v is not None:
                dt = np.float64 if name == "agreement" else np.int64
                v = np.ascontiguousarray(np.asarray(v, dtype=dt))
                if v.shape != (len(edges),):
                    raise DataError(f"{name} must have one entry per edge")
                v.setflags(write=False)
                object.__setattr__(self, name, v)
        edges.setflags(write=False)
        w.setflags(write=False)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def with_agreement(self, agreement) -> "AdjacencyGraph":
        return AdjacencyGraph(self.node_count, self.edges, self.weight,
                              agreement=agreement, crossings=self.crossings)

    def with_weight(self, weight) -> "AdjacencyGraph":
        return AdjacencyGraph(self.node_count, self.edges, weight,
                              agreement=self.agreement, crossings=self.crossings)

    def to_csv(self, path_or_buf) -> None:
        """Serialize as `src,dst,weight,agreement` (agreement blank when absent)."""
        own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
        f = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            f.write("src,dst,weight,agreement\n")
            ag = self.agreement
            for i in range(len(self.edges)):
                a = "" if ag is None else repr(float(ag[i]))
                f.write(f"{self.edges[i, 0]},{self.edges[i, 1]},"
                        f"{float(self.weight[i])!r},{a}\n")
        finally:
            if own:
                f.close()

    @classmethod
    def from_csv(cls, path_or_buf, node_count: int | None = None) -> "AdjacencyGraph":
        own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
        f = open(path_or_buf, "r", newline="") if own else path_or_buf
        try:
            header = f.readline().strip()
            if header != "src,dst,weight,agreement":
                raise DataError(f"unexpected edge CSV header: {header!r}")
            us, vs, ws, ags = [], [], [], []
            has_agreement = True
            for lineno, line in enumerate(f, start=2):
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                if len(parts) != 4:
                    raise DataError(f"line {lineno}: expected 4 fields")
                us.append(int(parts[0]))
                vs.append(int(parts[1]))
                ws.append(float(parts[2]))
                if parts[3] == "":
                    has_agreement = False
                else:
                    ags.append(float(parts[3]))
        finally:
            if own:
                f.close()
        edges = np.column_stack([us, vs]).astype(np.int64) if us else np.zeros((0, 2), np.int64)
        if node_count is None:
            node_count = int(edges.max()) + 1 if len(edges) else 0
        agreement = np.asarray(ags) if has_agreement and len(ags) == len(edges) else None
        return cls(node_count, edges, np.asarray(ws, dtype=np.float64), agreement=agreement)


def _canonical_edges(u, v):
    """Undirected canonical form: u < v, lexicographically sorted, deduplicated."""
    lo = np.minimum(u, v)
    hi = np.maximum(u, v)
    keep = lo != hi
    pairs = np.column_stack([lo[keep], hi[keep]])
    if len(pairs) == 0:
        return pairs.astype(np.int64)
    return np.unique(pairs, axis=0)


def build_knn_graph(positions, k: int, workers: int = 1) -> AdjacencyGraph:
    """Symmetrized K-nearest-neighbor graph over 3-D positions.

    Directed k-NN links by Euclidean distance are kept if either endpoint
    selected the other.  Distance ties are broken toward the lower node
    index so the result is identical across platforms and worker counts.
    Unit edge weights.
    """
    pos = np.ascontiguousarray(np.asarray(positions, dtype=np.float64))
    if pos.ndim != 2 or pos.shape[1] != 3:
        raise DataError("positions must be N x 3")
    n = len(pos)
    if n < 2:
        raise ParameterError("need at least 2 points")
    if k < 1:
        raise ParameterError("k must be >= 1")
    if k >= n:
        raise ParameterError(f"k={k} must be smaller than the point count {n}")
    tree = cKDTree(pos)
    kq = min(k + 2, n)
    dists, idx = tree.query(pos, k=kq, workers=workers)
    # Boundary radius per query: distance of the k-th other point.
    radius = dists[:, k]
    # A row needs tie handling unless its own index was returned and no
    # unreturned point can share the boundary distance.
    self_found = (idx == np.arange(n)[:, None]).any(axis=1)
    if kq >= k + 2:
        boundary_strict = dists[:, k + 1] > dists[:, k]
    else:
        # kq == n and k == n - 1: the neighbor set is every other point.
        boundary_strict = np.ones(n, dtype=bool)
    clean = self_found & boundary_strict
    targets = np.empty((n, k), dtype=np.int64)
    # Fast path: drop self, keep the k nearest others in distance order.
    rows_clean = np.nonzero(clean)[0]
    if len(rows_clean):
        sel = idx[rows_clean]
        keep = sel != rows_clean[:, None]
        others = sel[keep].reshape(len(rows_clean), kq - 1)
        targets[rows_clean] = others[:, :k]
    # Tie rows: gather everything within the boundary radius, order by
    # (distance, index), take the first k.
    for i in np.nonzero(~clean)[0]:
        cand = tree.query_ball_point(pos[i], radius[i] * (1 + 1e-12) if radius[i] > 0 else 0.0)
        cand = [j for j in cand if j != i]
        if len(cand) < k:
            # Degenerate radius from duplicate points: widen via a larger query.
            kk = k + 1
            while True:
                kk = min(2 * kk, n)
                d2, i2 = tree.query(pos[i], k=kk)
                cand = [j for j in np.asarray(i2).ravel() if j != i]
                if len(cand) >= k or kk == n:
                    break
        d = np.linalg.norm(pos[cand] - pos[i], axis=1)
        order = np.lexsort((cand, d))
        targets[i] = np.asarray(cand, dtype=np.int64)[order[:k]]
    sources = np.repeat(np.arange(n), k)
    edges = _canonical_edges(sources, targets.ravel())
    return AdjacencyGraph(n, edges, np.ones(len(edges), dtype=np.float64))


def superpoint_adjacency(point_to_superpoint, point_graph: AdjacencyGraph,
                         n_superpoints: int | None = None) -> AdjacencyGraph:
    """Superpoint graph: s and t connected iff some point edge crosses them.

    Each edge records how many point edges cross it (``crossings``); weights
    default to 1.
    """
    assign = np.asarray(point_to_superpoint, dtype=np.int64)
    if len(assign) != point_graph.node_count:
        raise DataError("point_to_superpoint length must match the point graph")
    if np.any(assign < 0):
        raise DataError("every point must be assigned a superpoint")
    if n_superpoints is None:
        n_superpoints = int(assign.max()) + 1 if len(assign) else 0
    su = assign[point_graph.edges[:, 0]]
    sv = assign[point_graph.edges[:, 1]]
    lo = np.minimum(su, sv)
    hi = np.maximum(su, sv)
    keep = lo != hi
    if not np.any(keep):
        return AdjacencyGraph(n_superpoints, np.zeros((0, 2), np.int64),
                              np.zeros(0), crossings=np.zeros(0, np.int64))
    pairs, counts = np.unique(np.column_stack([lo[keep], hi[keep]]), axis=0,
                              return_counts=True)
    return AdjacencyGraph(n_superpoints, pairs, np.ones(len(pairs)),
                          crossings=counts.astype(np.int64))
