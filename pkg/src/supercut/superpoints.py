"""Superpoint oversegmentation, majority labels, and agreement targets.

Superpoints are the constant components of a piecewise-constant
approximation of per-point features (quadratic fidelity, unit edge
weights), so they reuse the cut-pursuit engine with zero class channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import IGNORE, ClusteringParams, PanopticLabels, PointCloud
from .cutpursuit import solve_piecewise_constant
from .errors import DataError, ParameterError
from .graphs import AdjacencyGraph


@dataclass(frozen=True)
class SuperpointPartition:
    """point -> superpoint map with optional centroids and majority labels."""

    point_to_superpoint: np.ndarray
    centroid: np.ndarray | None = None
    majority_object: np.ndarray | None = None
    majority_class: np.ndarray | None = None

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.point_to_superpoint, dtype=np.int64))
        if a.ndim != 1 or (len(a) and a.min() < 0):
            raise DataError("point_to_superpoint must be 1-D and nonnegative")
        a.setflags(write=False)
        object.__setattr__(self, "point_to_superpoint", a)
        for name, dt in (("centroid", np.float64), ("majority_object", np.int64),
                         ("majority_class", np.int64)):
            v = getattr(self, name)
            if v is not None:
                v = np.ascontiguousarray(np.asarray(v, dtype=dt))
                if len(v) != self.num_superpoints:
                    raise DataError(f"{name} must have one row per superpoint")
                v.setflags(write=False)
                object.__setattr__(self, name, v)

    @property
    def num_points(self) -> int:
        return len(self.point_to_superpoint)

    @property
    def num_superpoints(self) -> int:
        return int(self.point_to_superpoint.max()) + 1 if self.num_points else 0

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.point_to_superpoint, minlength=self.num_superpoints)

    def members(self) -> list:
        order = np.argsort(self.point_to_superpoint, kind="stable")
        return np.split(order, np.cumsum(self.sizes)[:-1])


def compute_superpoints(features, point_graph: AdjacencyGraph, regularization: float,
                        positions=None, params: ClusteringParams | None = None,
                        ) -> SuperpointPartition:
    """Oversegment points into superpoints.

    Superpoints are the constant components of the cut-pursuit solution for
    ||x_p - y_p||^2 fidelity with unit edge weights under the given
    regularization strength.  Granularity shrinks as regularization grows.
    When positions are supplied, per-superpoint centroids are filled in.
    """
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or len(feats) != point_graph.node_count:
        raise DataError("features must be N x F over the point graph nodes")
    if point_graph.node_count == 0:
        raise ParameterError("cannot partition an empty cloud")
    if not regularization > 0:
        raise ParameterError("regularization must be > 0")
    if not np.all(np.isfinite(feats)):
        raise DataError("features must be finite")
    if params is None:
        params = ClusteringParams()
    unit = point_graph.with_weight(np.ones(point_graph.edge_count))
    assign, _, _, _, _ = solve_piecewise_constant(
        None, feats, 1.0, unit, float(regularization), params)
    centroid = None
    if positions is not None:
        pos = np.asarray(positions, dtype=np.float64)
        k = int(assign.max()) + 1
        centroid = np.column_stack([
            np.bincount(assign, weights=pos[:, j], minlength=k) for j in range(3)
        ]) / np.bincount(assign, minlength=k)[:, None]
    return SuperpointPartition(assign, centroid=centroid)


def _majority(values, ignore=IGNORE):
    """Mode with IGNORE excluded; ties take the smallest id; all-IGNORE -> IGNORE."""
    v = values[values != ignore]
    if len(v) == 0:
        return ignore
    ids, counts = np.unique(v, return_counts=True)
    return int(ids[np.argmax(counts)])  # np.unique sorts, argmax takes first max


def majority_labels(sp: SuperpointPartition, cloud: PointCloud) -> SuperpointPartition:
    """Fill per-superpoint majority object and class from ground truth."""
    if cloud.semantic is None or cloud.object is None:
        raise DataError("majority labels need a labeled cloud")
    if len(cloud) != sp.num_points:
        raise DataError("cloud and superpoint partition sizes differ")
    obj = np.empty(sp.num_superpoints, dtype=np.int64)
    cls = np.empty(sp.num_superpoints, dtype=np.int64)
    for s, members in enumerate(sp.members()):
        obj[s] = _majority(cloud.object[members])
        cls[s] = _majority(cloud.semantic[members])
    return SuperpointPartition(sp.point_to_superpoint, centroid=sp.centroid,
                               majority_object=obj, majority_class=cls)


def true_agreement(s: int, t: int, sp: SuperpointPartition, cloud: PointCloud) -> float:
    """Ground-truth object agreement between two superpoints.

    Average of the fraction of s covered by t's majority object and the
    fraction of t covered by s's majority object.  Returns NaN (the IGNORE
    marker) when either superpoint is IGNORE-labeled.
    """
    if sp.majority_object is None:
        raise DataError("superpoints must carry majority labels")
    obj_s = sp.majority_object[s]
    obj_t = sp.majority_object[t]
    if obj_s == IGNORE or obj_t == IGNORE:
        return float("nan")
    assign = sp.point_to_superpoint
    in_s = assign == s
    in_t = assign == t
    frac_s = np.count_nonzero(in_s & (cloud.object == obj_t)) / np.count_nonzero(in_s)
    frac_t = np.count_nonzero(in_t & (cloud.object == obj_s)) / np.count_nonzero(in_t)
    return 0.5 * (frac_s + frac_t)


def true_agreements(graph: AdjacencyGraph, sp: SuperpointPartition,
                    cloud: PointCloud) -> np.ndarray:
    """Vectorized agreement targets for every edge of a superpoint graph.

    IGNORE pairs come back as NaN so losses can drop them.
    """
    if sp.majority_object is None:
        raise DataError("superpoints must carry majority labels")
    assign = sp.point_to_superpoint
    sizes = sp.sizes.astype(np.float64)
    obj = sp.majority_object
    # overlap[s, o] = |{p in s : obj(p) = o}| restricted to the majority
    # objects that actually appear, via a compact object reindexing.
    need = np.unique(obj[obj != IGNORE])
    remap = {int(o): i for i, o in enumerate(need)}
    point_obj = cloud.object
    out = np.empty(graph.edge_count, dtype=np.float64)
    # Count per (superpoint, needed object) pairs sparsely.
    if len(need):
        pos = np.clip(np.searchsorted(need, point_obj), 0, len(need) - 1)
        valid = need[pos] == point_obj
        idx = np.where(valid, pos, -1)
    else:
        idx = np.full(len(point_obj), -1, dtype=np.int64)
        valid = idx >= 0
    key = assign[valid] * max(len(need), 1) + idx[valid]
    counts = np.bincount(key, minlength=sp.num_superpoints * max(len(need), 1))
    counts = counts.reshape(sp.num_superpoints, max(len(need), 1))
    for i, (s, t) in enumerate(graph.edges):
        os_, ot = obj[s], obj[t]
        if os_ == IGNORE or ot == IGNORE:
            out[i] = np.nan
            continue
        out[i] = 0.5 * (counts[s, remap[int(ot)]] / sizes[s]
                        + counts[t, remap[int(os_)]] / sizes[t])
    return out


def pointwise_agreement(p: int, q: int, cloud: PointCloud) -> float:
    """Binary agreement between two labeled points; NaN marks IGNORE."""
    if cloud.object is None:
        raise DataError("pointwise agreement needs object labels")
    op, oq = cloud.object[p], cloud.object[q]
    if op == IGNORE or oq == IGNORE:
        return float("nan")
    return 1.0 if op == oq else 0.0


def propagate_to_points(sp: SuperpointPartition,
                        superpoint_labels: PanopticLabels) -> PanopticLabels:
    """Each point inherits the class and object index of its superpoint."""
    if len(superpoint_labels) != sp.num_superpoints:
        raise DataError("labels must cover every superpoint")
    a = sp.point_to_superpoint
    return PanopticLabels(superpoint_labels.class_id[a],
                          superpoint_labels.object_id[a])
