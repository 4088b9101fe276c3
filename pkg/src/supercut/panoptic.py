"""End-to-end inference pipeline: agreements -> edge weights -> clustering
-> panoptic labels, plus the post-hoc parameter grid search."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (IGNORE, ClassTable, ClusteringParams, NodeSignal,
                   PanopticLabels, PointCloud)
from .cutpursuit import Partition, solve_gmp
from .errors import DataError, ParameterError
from .graphs import AdjacencyGraph, build_knn_graph, superpoint_adjacency
from .metrics import panoptic_quality
from .superpoints import (SuperpointPartition, compute_superpoints,
                          majority_labels, propagate_to_points, true_agreements)


def edge_weight(a, epsilon: float):
    """Cut cost of an edge from its object agreement: a / (1 - a + epsilon).

    Strictly increasing in a, finite at a = 1 (value 1/epsilon).
    """
    if not epsilon > 0:
        raise ParameterError("epsilon must be > 0")
    a = np.clip(np.asarray(a, dtype=np.float64), 0.0, 1.0)
    return a / (1.0 - a + epsilon)


def apply_weights(graph: AdjacencyGraph, epsilon: float) -> AdjacencyGraph:
    """Turn per-edge agreements into cut weights."""
    if graph.agreement is None:
        raise DataError("graph carries no agreements")
    return graph.with_weight(edge_weight(graph.agreement, epsilon))


def clusters_to_panoptic(partition: Partition, table: ClassTable) -> PanopticLabels:
    """Convert clusters into panoptic labels over the graph nodes.

    Each cluster takes the argmax class of its average distribution (ties to
    the lower class id).  Thing clusters receive fresh unique indices in
    ascending component-id order starting at C; stuff clusters of class c
    all share the reserved index c.
    """
    values = partition.class_values
    if values.shape[1] != table.num_classes:
        raise DataError("component values and class table disagree on C")
    comp_class = values.argmax(axis=1)  # argmax takes the lowest index on ties
    comp_obj = np.empty(len(comp_class), dtype=np.int64)
    next_thing = table.first_thing_index
    for k, c in enumerate(comp_class):
        if table.is_thing[c]:
            comp_obj[k] = next_thing
            next_thing += 1
        else:
            comp_obj[k] = table.stuff_index(int(c))
    a = partition.assignment
    return PanopticLabels(comp_class[a], comp_obj[a])


@dataclass(frozen=True)
class PipelineConfig:
    """Configuration of a full pipeline run.

    scores_source / agreement_source are either "oracle" (built from ground
    truth) or in-memory arrays supplied by the caller; the CLI additionally
    accepts files.  corruption_rate only applies to agreement_source
    "noisy-oracle"; class_noise mixes oracle one-hots toward uniform.
    """

    table: ClassTable
    params: ClusteringParams = field(default_factory=ClusteringParams)
    knn_k: int = 8
    superpoint_regularization: float = 0.02
    scores_source: object = "oracle"
    agreement_source: object = "oracle"
    corruption_rate: float = 0.0
    class_noise: float = 0.0
    features: object = None  # optional user-supplied per-point features


@dataclass(frozen=True)
class PipelineResult:
    point_labels: PanopticLabels
    node_labels: PanopticLabels
    partition: Partition
    superpoints: SuperpointPartition
    graph: AdjacencyGraph
    signal: NodeSignal
    timings_ms: dict


def default_features(cloud: PointCloud) -> np.ndarray:
    """Position (scaled by scene diameter) and RGB (scaled to [0,1]),
    each channel z-scored."""
    pos = cloud.positions
    span = pos.max(axis=0) - pos.min(axis=0)
    diameter = float(np.linalg.norm(span))
    cols = [pos / max(diameter, 1e-12)]
    if cloud.colors is not None:
        cols.append(cloud.colors.astype(np.float64) / 255.0)
    feats = np.column_stack(cols)
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    return (feats - mean) / np.maximum(std, 1e-12)


def _one_hot(class_ids, C):
    out = np.zeros((len(class_ids), C), dtype=np.float64)
    ok = (class_ids >= 0) & (class_ids < C)
    out[np.nonzero(ok)[0], class_ids[ok]] = 1.0
    out[~ok] = 1.0 / C  # IGNORE superpoints get an uninformative row
    return out


def oracle_class_scores(majority_class, C: int, class_noise: float = 0.0) -> np.ndarray:
    """One-hot majority classes, optionally mixed toward uniform."""
    onehot = _one_hot(np.asarray(majority_class, dtype=np.int64), C)
    r = float(class_noise)
    return (1.0 - r) * onehot + r / C


def corrupt_agreements(agreements, rate: float, seed: int) -> np.ndarray:
    """With probability ``rate`` replace each agreement by uniform [0, 1]."""
    a = np.asarray(agreements, dtype=np.float64).copy()
    if rate <= 0:
        return a
    rng = np.random.Generator(np.random.Philox(key=seed))
    hit = rng.random(len(a)) < rate
    a[hit] = rng.random(np.count_nonzero(hit))
    return a


def run_pipeline(cloud: PointCloud, config: PipelineConfig,
                 superpoints: SuperpointPartition | None = None) -> PipelineResult:
    """superpoints -> adjacency -> signals -> weights -> clustering ->
    panoptic conversion -> point propagation, with per-stage wall times.

    A precomputed superpoint partition skips the oversegmentation stage.
    """
    timings = {}
    t0 = time.perf_counter()

    def tick(stage):
        nonlocal t0
        t1 = time.perf_counter()
        timings[stage] = (t1 - t0) * 1000.0
        t0 = t1

    scores_oracle = isinstance(config.scores_source, str)
    agreement_oracle = isinstance(config.agreement_source, str)
    oracle_needed = scores_oracle or agreement_oracle
    if oracle_needed and (cloud.semantic is None or cloud.object is None):
        raise DataError("oracle signal sources need a labeled cloud")

    point_graph = build_knn_graph(cloud.positions, config.knn_k,
                                  workers=config.params.workers)
    tick("knn_graph")
    if superpoints is None:
        feats = config.features if config.features is not None else default_features(cloud)
        sp = compute_superpoints(feats, point_graph, config.superpoint_regularization,
                                 positions=cloud.positions, params=config.params)
    else:
        sp = superpoints
        if sp.num_points != len(cloud):
            raise DataError("superpoint partition does not cover the cloud")
        if sp.centroid is None:
            k = sp.num_superpoints
            pos = cloud.positions
            cent = np.column_stack([
                np.bincount(sp.point_to_superpoint, weights=pos[:, j], minlength=k)
                for j in range(3)]) / np.bincount(sp.point_to_superpoint,
                                                  minlength=k)[:, None]
            sp = SuperpointPartition(sp.point_to_superpoint, centroid=cent,
                                     majority_object=sp.majority_object,
                                     majority_class=sp.majority_class)
    if oracle_needed and sp.majority_object is None:
        sp = majority_labels(sp, cloud)
    tick("superpoints")
    graph = superpoint_adjacency(sp.point_to_superpoint, point_graph,
                                 sp.num_superpoints)
    tick("adjacency")

    C = config.table.num_classes
    if scores_oracle:
        scores = oracle_class_scores(sp.majority_class, C, config.class_noise)
    else:
        scores = np.asarray(config.scores_source, dtype=np.float64)
        if scores.shape != (sp.num_superpoints, C):
            raise DataError("class scores must be S x C over the superpoints")
    if agreement_oracle:
        agreements = true_agreements(graph, sp, cloud)
        agreements = np.nan_to_num(agreements, nan=0.0)
        if config.agreement_source == "noisy-oracle":
            agreements = corrupt_agreements(agreements, config.corruption_rate,
                                            config.params.seed)
    else:
        agreements = np.asarray(config.agreement_source, dtype=np.float64)
        if agreements.shape != (graph.edge_count,):
            raise DataError("agreements must have one entry per superpoint edge")
    signal = NodeSignal(scores, sp.centroid)
    graph = apply_weights(graph.with_agreement(agreements), config.params.epsilon)
    tick("signals")

    partition = solve_gmp(signal, graph, config.params)
    tick("clustering")
    node_labels = clusters_to_panoptic(partition, config.table)
    point_labels = propagate_to_points(sp, node_labels)
    tick("conversion")
    timings["total"] = sum(timings.values())
    return PipelineResult(point_labels, node_labels, partition, sp, graph,
                          signal, timings)


def grid_search(scenes, lambda_grid, eta_grid, epsilon_grid,
                config: PipelineConfig):
    """Evaluate mean PQ for every (lambda, eta, epsilon) cell.

    Returns (best ClusteringParams, rows) where rows are
    (lambda, eta, epsilon, mean_pq).  Ties go to the lexicographically
    smallest cell.
    """
    lams = [float(v) for v in lambda_grid]
    etas = [float(v) for v in eta_grid]
    epss = [float(v) for v in epsilon_grid]
    if not lams or not etas or not epss:
        raise ParameterError("empty parameter grid")
    scenes = list(scenes)
    if not scenes:
        raise ParameterError("grid search needs at least one scene")
    rows = []
    best = None
    for lam in sorted(lams):
        for eta in sorted(etas):
            for eps in sorted(epss):
                params = replace(config.params, lam=lam, eta=eta, epsilon=eps)
                cfg = replace(config, params=params)
                pqs = []
                for cloud in scenes:
                    result = run_pipeline(cloud, cfg)
                    pqs.append(panoptic_quality(result.point_labels, cloud,
                                                config.table).pq)
                mean_pq = float(np.mean(pqs))
                rows.append((lam, eta, eps, mean_pq))
                if best is None or mean_pq > best[3]:
                    best = (lam, eta, eps, mean_pq)
    best_params = replace(config.params, lam=best[0], eta=best[1], epsilon=best[2])
    return best_params, rows
