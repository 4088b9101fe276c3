"""Optimal assignment solving and the synthetic matching-vs-clustering
scalability benchmark."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import ClusteringParams, NodeSignal, normalize_scores
from .cutpursuit import solve_gmp
from .errors import ParameterError
from .graphs import AdjacencyGraph

# Finite padding for disallowed pairs; can never enter an optimal solution
# while a feasible entry exists.
SENTINEL_COST = 1e6


@dataclass(frozen=True)
class CostMatrix:
    """Sparse n_true x n_pred cost matrix (at most a few entries per column)."""

    n_true: int
    n_pred: int
    rows: np.ndarray
    cols: np.ndarray
    costs: np.ndarray

    def __post_init__(self):
        if self.n_true < 1 or self.n_pred < 1:
            raise ParameterError("cost matrix dimensions must be >= 1")
        for name, dt in (("rows", np.int64), ("cols", np.int64), ("costs", np.float64)):
            v = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=dt))
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        if not np.all(np.isfinite(self.costs)):
            raise ParameterError("costs must be finite")

    def dense(self) -> np.ndarray:
        out = np.full((self.n_true, self.n_pred), SENTINEL_COST)
        out[self.rows, self.cols] = self.costs
        return out


def hungarian_assign(costs: CostMatrix):
    """Minimum-cost maximum matching; rectangular shapes matched on the
    smaller side.  Returns (row indices, column indices, total cost)."""
    dense = costs.dense()
    r, c = linear_sum_assignment(dense)
    return r, c, float(dense[r, c].sum())


def synthetic_cost_matrix(n_true: int, n_pred: int, seed: int = 0) -> CostMatrix:
    """Each proposal column gets 1-3 uniformly chosen true rows with uniform
    cost in (0, 1]; every other entry is the large sentinel."""
    if n_true < 1 or n_pred < 1:
        raise ParameterError("dimensions must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    rows, cols, costs = [], [], []
    for j in range(n_pred):
        k = int(rng.integers(1, min(3, n_true) + 1))
        rr = rng.choice(n_true, size=k, replace=False)
        rows.extend(int(i) for i in rr)
        cols.extend([j] * k)
        costs.extend(1.0 - rng.random(k))  # uniform in (0, 1]
    return CostMatrix(n_true, n_pred, rows, cols, costs)


def _clustering_instance(n_objects: int, seed: int):
    """Synthetic superpoint graph with n_objects separable clusters of
    nodes, sized like the scenes the clustering step sees."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    per = 8  # superpoints per object
    n = n_objects * per
    obj = np.repeat(np.arange(n_objects), per)
    pos = rng.random((n, 3)) * 0.2 + obj[:, None] * np.array([1.0, 0.0, 0.0])
    C = 4
    raw = rng.normal(size=(n, C)) * 0.1
    raw[np.arange(n), obj % C] += 4.0
    scores = normalize_scores(raw)
    # Chain within objects plus sparse cross links.
    u = np.arange(n - 1)
    v = u + 1
    agree = (obj[u] == obj[v]).astype(np.float64)
    edges = np.column_stack([u, v])
    graph = AdjacencyGraph(n, edges, np.ones(len(edges)), agreement=agree)
    from .panoptic import apply_weights  # local import avoids a cycle
    graph = apply_weights(graph, 1e-4)
    return NodeSignal(scores, pos), graph


def bench_matching(sizes, repeats: int = 3, seed: int = 0):
    """Median wall time of the Hungarian solve per (n_true, n_pred) pair,
    paired with clustering-solver timings on graphs with matching object
    counts.  Returns rows (method, n_true, n_pred, median_seconds)."""
    rows = []
    repeats = max(1, int(repeats))
    for n_true, n_pred in sizes:
        costs = synthetic_cost_matrix(n_true, n_pred, seed)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            hungarian_assign(costs)
            times.append(time.perf_counter() - t0)
        rows.append(("hungarian", int(n_true), int(n_pred),
                     float(np.median(times))))
    for n_objects in sorted({int(n) for n, _ in sizes}):
        signal, graph = _clustering_instance(n_objects, seed)
        params = ClusteringParams(lam=1.0, eta=0.1, epsilon=1e-4, seed=seed)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            solve_gmp(signal, graph, params)
            times.append(time.perf_counter() - t0)
        rows.append(("clustering", n_objects, n_objects, float(np.median(times))))
    return rows
