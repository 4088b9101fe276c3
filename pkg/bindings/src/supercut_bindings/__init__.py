"""Thin array-boundary bindings for the supercut library.

Exposes three calls to numeric-array callers: py_solve_gmp,
py_compute_superpoints, and py_panoptic_quality.  Each validates shapes
and dtypes at the boundary, forwards to the wrapped library unchanged,
and converts library failures into BindingError carrying the original
message verbatim.  Results are numerically identical to calling the
library (or its CLI) on the same inputs.
"""

from __future__ import annotations

import numpy as np

import supercut as _sc
from supercut import SupercutError

__version__ = "0.1.0"

__all__ = ["BindingError", "py_solve_gmp", "py_compute_superpoints",
           "py_panoptic_quality"]

_IGNORE = _sc.IGNORE


class BindingError(ValueError):
    """Boundary failure: bad shapes/dtypes or a wrapped library error."""


def _as_array(name, value, dtype, shape):
    """Contiguous array of the given dtype; dimensions in ``shape`` that are
    None are free, others must match exactly."""
    try:
        a = np.ascontiguousarray(np.asarray(value, dtype=dtype))
    except (TypeError, ValueError) as e:
        raise BindingError(f"{name}: cannot interpret as {np.dtype(dtype).name} "
                           f"array ({e})") from None
    if a.ndim != len(shape):
        raise BindingError(f"{name}: expected {len(shape)}-D, got {a.ndim}-D")
    for axis, want in enumerate(shape):
        if want is not None and a.shape[axis] != want:
            raise BindingError(f"{name}: expected size {want} on axis {axis}, "
                               f"got {a.shape[axis]}")
    return a


def _forward(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except SupercutError as e:
        raise BindingError(str(e)) from None


def _labels(name, value, n=None):
    a = _as_array(name, value, np.int64, (n,))
    out = a.copy()
    out[a < 0] = _IGNORE  # negative on the wire marks IGNORE
    return out


def py_solve_gmp(positions, class_scores, edges, agreements,
                 lam: float = 10.0, eta: float = 5e-2,
                 epsilon: float = 1e-4, seed: int = 0):
    """Cluster a node signal on an agreement-weighted graph.

    positions: N x 3 float64, class_scores: N x C rows on the simplex,
    edges: E x 2 int64, agreements: E float64 in [0, 1].  Returns
    (component ids int32 N, component values K x (C + 3) with the mean
    class distribution followed by the centroid, energy float).
    """
    pos = _as_array("positions", positions, np.float64, (None, 3))
    scores = _as_array("class_scores", class_scores, np.float64,
                       (len(pos), None))
    e = _as_array("edges", edges, np.int64, (None, 2))
    a = _as_array("agreements", agreements, np.float64, (len(e),))
    graph = _forward(_sc.AdjacencyGraph, len(pos), e,
                     _forward(_sc.edge_weight, a, float(epsilon)))
    signal = _forward(_sc.NodeSignal, scores, pos)
    if float(lam) == 0.0:
        # Unregularized limit: the parameter object requires lam > 0, but
        # the generic driver accepts the boundary value directly.
        params = _forward(_sc.ClusteringParams, eta=float(eta),
                          epsilon=float(epsilon), seed=int(seed))
        assign, yc, yq, e_total, _ = _forward(
            _sc.solve_piecewise_constant, scores, pos, float(eta), graph,
            0.0, params)
        return (assign.astype(np.int32), np.hstack([yc, yq]), float(e_total))
    params = _forward(_sc.ClusteringParams, lam=float(lam), eta=float(eta),
                      epsilon=float(epsilon), seed=int(seed))
    part = _forward(_sc.solve_gmp, signal, graph, params)
    values = np.hstack([part.class_values, part.pos_values])
    return part.assignment.astype(np.int32), values, float(part.energy)


def py_compute_superpoints(features, edges, regularization: float):
    """Oversegment: piecewise-constant fit of the features on the edge
    graph.  features: N x F float64, edges: E x 2 int64.  Returns the
    int32 point -> superpoint assignment."""
    feats = _as_array("features", features, np.float64, (None, None))
    e = _as_array("edges", edges, np.int64, (None, 2))
    graph = _forward(_sc.AdjacencyGraph, len(feats), e,
                     np.ones(len(e), dtype=np.float64))
    sp = _forward(_sc.compute_superpoints, feats, graph, float(regularization))
    return sp.point_to_superpoint.astype(np.int32)


def py_panoptic_quality(pred_class, pred_obj, gt_class, gt_obj, is_thing,
                        class_names=None) -> dict:
    """Panoptic metrics of a prediction against ground truth.

    Label arrays are int64 of equal length; negative entries mark IGNORE.
    is_thing is one bool per class.  Returns the metrics mapping
    {pq, rq, sq, miou, per_class}; class_names (optional) sets the
    per_class keys, defaulting to class_0..class_{C-1}.
    """
    gc = _labels("gt_class", gt_class)
    go = _labels("gt_obj", gt_obj, len(gc))
    pc = _labels("pred_class", pred_class, len(gc))
    po = _labels("pred_obj", pred_obj, len(gc))
    flags = _as_array("is_thing", is_thing, np.bool_, (None,))
    names = class_names if class_names is not None \
        else [f"class_{i}" for i in range(len(flags))]
    if len(names) != len(flags):
        raise BindingError("class_names and is_thing lengths differ")
    table = _forward(_sc.ClassTable, list(names), flags)
    cloud = _forward(_sc.PointCloud, np.zeros((len(gc), 3)),
                     semantic=gc, object=go)
    pred = _forward(_sc.PanopticLabels, pc, po)
    m = _forward(_sc.panoptic_quality, pred, cloud, table)
    return m.to_dict(table)
