"""Deterministic synthetic scenes with full panoptic ground truth.

Objects are jittered boxes and spheres placed on a grid above a stuff
ground plane.  The counter-based Philox generator keeps the streams
platform-stable, so the same seed reproduces the same cloud bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import IGNORE, ClassTable, PointCloud, validate_ground_truth
from .errors import DataError, ParameterError
from .graphs import AdjacencyGraph
from .panoptic import corrupt_agreements, oracle_class_scores
from .superpoints import SuperpointPartition, true_agreements


def default_class_table() -> ClassTable:
    """One stuff ground class plus three thing classes."""
    return ClassTable(["ground", "box", "sphere", "pillar"],
                      [False, True, True, True])


@dataclass(frozen=True)
class SceneSpec:
    n_objects: int = 20
    table: ClassTable = field(default_factory=default_class_table)
    points_per_object: tuple = (40, 80)
    ground_extent: float | None = None  # defaults to the object grid extent
    ground_points: int = 800
    jitter_sigma: float = 0.01
    grid_spacing: float = 1.0
    placement_jitter: float = 0.1
    min_gap: float = 0.3
    object_size: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.n_objects < 0 or self.ground_points < 0:
            raise ParameterError("counts must be nonnegative")
        if self.points_per_object[0] < 1 or \
                self.points_per_object[1] < self.points_per_object[0]:
            raise ParameterError("points_per_object range is invalid")
        if not self.min_gap > 2 * self.jitter_sigma:
            raise ParameterError("min_gap must exceed 2 * jitter_sigma "
                                 "to guarantee separability")
        free = self.grid_spacing - self.object_size - 2 * self.placement_jitter
        if self.n_objects > 1 and free < self.min_gap:
            raise ParameterError(
                "infeasible packing: grid_spacing leaves less than min_gap "
                "between objects")


def generate_scene(spec: SceneSpec) -> PointCloud:
    """Sample a labeled cloud; ground truth always passes validation."""
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    table = spec.table
    thing_classes = np.nonzero(table.is_thing)[0]
    stuff_classes = np.nonzero(~table.is_thing)[0]
    if spec.n_objects > 0 and len(thing_classes) == 0:
        raise ParameterError("scene spec asks for objects but has no thing class")
    if spec.ground_points > 0 and len(stuff_classes) == 0:
        raise ParameterError("scene spec asks for ground but has no stuff class")

    side = max(int(np.ceil(np.sqrt(max(spec.n_objects, 1)))), 1)
    extent = spec.ground_extent
    if extent is None:
        extent = side * spec.grid_spacing

    positions, colors, semantic, objects = [], [], [], []

    # Stuff ground plane at z ~ 0.
    if spec.ground_points > 0:
        g = np.empty((spec.ground_points, 3))
        g[:, 0] = rng.random(spec.ground_points) * extent
        g[:, 1] = rng.random(spec.ground_points) * extent
        g[:, 2] = rng.normal(0.0, spec.jitter_sigma, spec.ground_points)
        positions.append(g)
        ground_class = int(stuff_classes[0])
        colors.append(np.tile(np.array([[90, 90, 90]], dtype=np.uint8),
                              (spec.ground_points, 1)))
        semantic.append(np.full(spec.ground_points, ground_class, dtype=np.int64))
        objects.append(np.full(spec.ground_points,
                               table.stuff_index(ground_class), dtype=np.int64))

    # Thing objects on a jittered grid, floating above the plane.
    z_base = spec.min_gap + 3 * spec.jitter_sigma + spec.object_size
    for i in range(spec.n_objects):
        gx, gy = i % side, i // side
        cx = (gx + 0.5) * spec.grid_spacing + \
            rng.uniform(-spec.placement_jitter, spec.placement_jitter)
        cy = (gy + 0.5) * spec.grid_spacing + \
            rng.uniform(-spec.placement_jitter, spec.placement_jitter)
        center = np.array([cx, cy, z_base])
        npts = int(rng.integers(spec.points_per_object[0],
                                spec.points_per_object[1] + 1))
        shape_is_box = bool(rng.integers(2))
        half = spec.object_size / 2.0
        if shape_is_box:
            pts = center + rng.uniform(-half, half, (npts, 3))
        else:
            raw = rng.normal(size=(npts, 3))
            raw /= np.maximum(np.linalg.norm(raw, axis=1, keepdims=True), 1e-12)
            radii = half * rng.random(npts) ** (1.0 / 3.0)
            pts = center + raw * radii[:, None]
        pts += rng.normal(0.0, spec.jitter_sigma, (npts, 3))
        class_id = int(thing_classes[i % len(thing_classes)])
        color = rng.integers(30, 226, size=3).astype(np.uint8)
        positions.append(pts)
        colors.append(np.tile(color[None, :], (npts, 1)))
        semantic.append(np.full(npts, class_id, dtype=np.int64))
        objects.append(np.full(npts, table.first_thing_index + i, dtype=np.int64))

    if not positions:
        raise ParameterError("scene spec produces no points")
    cloud = PointCloud(np.vstack(positions), np.vstack(colors),
                       np.concatenate(semantic), np.concatenate(objects))
    problems = validate_ground_truth(cloud, table)
    if problems:
        raise DataError("generated scene failed validation: " + "; ".join(problems))
    return cloud


def oracle_signals(cloud: PointCloud, graph: AdjacencyGraph, table: ClassTable,
                   superpoints: SuperpointPartition | None = None,
                   class_noise: float = 0.0, agreement_noise: float = 0.0,
                   seed: int = 0):
    """Clustering-oracle inputs: one-hot true classes and true agreements.

    At the point level (superpoints None) agreements are the binary
    same-object indicator; at the superpoint level they follow the overlap
    formula.  Noise rates of 0 reproduce the oracle exactly; class_noise
    mixes toward uniform, agreement_noise corrupts edges at that rate.
    Returns (class_scores, agreements); IGNORE edges come back NaN.
    """
    if cloud.semantic is None or cloud.object is None:
        raise DataError("oracle signals need a labeled cloud")
    C = table.num_classes
    if superpoints is None:
        scores = oracle_class_scores(cloud.semantic, C, class_noise)
        eu, ev = graph.edges[:, 0], graph.edges[:, 1]
        ou, ov = cloud.object[eu], cloud.object[ev]
        agreements = (ou == ov).astype(np.float64)
        agreements[(ou == IGNORE) | (ov == IGNORE)] = np.nan
    else:
        if superpoints.majority_class is None:
            raise DataError("superpoints must carry majority labels")
        scores = oracle_class_scores(superpoints.majority_class, C, class_noise)
        agreements = true_agreements(graph, superpoints, cloud)
    if agreement_noise > 0:
        ok = np.isfinite(agreements)
        corrupted = corrupt_agreements(np.nan_to_num(agreements, nan=0.0),
                                       agreement_noise, seed)
        agreements = np.where(ok, corrupted, np.nan)
    return scores, agreements
