"""Shared domain types and label conventions.

Label conventions
-----------------
* Class ids are dense in [0, C).  Object indices are non-negative integers.
* ``IGNORE`` marks unlabeled points and is excluded from every label
  invariant, loss denominator, and metric.
* "Stuff" classes get one object index shared by every point of that class:
  the reserved index of stuff class ``c`` is ``c`` itself.  "Thing" object
  indices start at ``C``, so the two ranges never collide.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError, ParameterError

# Maximum representable unsigned 32-bit id; never collides with dense ids.
IGNORE = 4294967295


def _as_int_labels(a, name):
    a = np.asarray(a, dtype=np.int64)
    if a.ndim != 1:
        raise DataError(f"{name} must be a 1-D array, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class ClassTable:
    """Semantic class inventory with thing/stuff flags."""

    names: tuple
    is_thing: np.ndarray

    def __init__(self, names, is_thing):
        object.__setattr__(self, "names", tuple(str(n) for n in names))
        flags = np.asarray(is_thing, dtype=bool)
        if flags.ndim != 1 or len(flags) != len(self.names):
            raise DataError("is_thing must have one flag per class name")
        if len(self.names) < 1:
            raise ParameterError("a class table needs at least one class")
        flags.setflags(write=False)
        object.__setattr__(self, "is_thing", flags)

    @property
    def num_classes(self) -> int:
        return len(self.names)

    def stuff_index(self, class_id: int) -> int:
        """Reserved object index for a stuff class (the class id itself)."""
        return int(class_id)

    @property
    def first_thing_index(self) -> int:
        """Thing object indices start right after the reserved stuff range."""
        return self.num_classes

    def to_dict(self) -> dict:
        return {"names": list(self.names), "is_thing": self.is_thing.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ClassTable":
        return cls(d["names"], d["is_thing"])


@dataclass(frozen=True)
class PointCloud:
    """Parallel per-point arrays; labels are optional.

    positions are meters (N x 3 float64), colors are RGB in [0, 255],
    semantic holds class ids in [0, C) or IGNORE, object holds object
    indices or IGNORE.
    """

    positions: np.ndarray
    colors: np.ndarray | None = None
    semantic: np.ndarray | None = None
    object: np.ndarray | None = None

    def __post_init__(self):
        pos = np.ascontiguousarray(np.asarray(self.positions, dtype=np.float64))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise DataError(f"positions must be N x 3, got shape {pos.shape}")
        object.__setattr__(self, "positions", pos)
        n = len(pos)
        if self.colors is not None:
            col = np.asarray(self.colors)
            if col.shape != (n, 3):
                raise DataError("colors must be N x 3")
            object.__setattr__(self, "colors", np.ascontiguousarray(col, dtype=np.uint8))
        for name in ("semantic", "object"):
            v = getattr(self, name)
            if v is not None:
                v = _as_int_labels(v, name)
                if len(v) != n:
                    raise DataError(f"{name} has length {len(v)}, expected {n}")
                object.__setattr__(self, name, v)
        for a in (self.positions, self.semantic, self.object):
            if a is not None:
                a.setflags(write=False)

    def __len__(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class NodeSignal:
    """Per-node class probabilities plus a 3-D position (the clustered signal)."""

    class_scores: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        scores = np.ascontiguousarray(np.asarray(self.class_scores, dtype=np.float64))
        pos = np.ascontiguousarray(np.asarray(self.position, dtype=np.float64))
        if scores.ndim != 2:
            raise DataError("class_scores must be N x C")
        if pos.shape != (len(scores), 3):
            raise DataError("position must be N x 3 with one row per score row")
        if not np.all(np.isfinite(scores)):
            raise NumericError("class_scores contain non-finite values")
        if np.any(scores < 0):
            raise DataError("class_scores must be nonnegative")
        sums = scores.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6):
            raise DataError("each class_scores row must sum to 1 within 1e-6")
        scores.setflags(write=False)
        pos.setflags(write=False)
        object.__setattr__(self, "class_scores", scores)
        object.__setattr__(self, "position", pos)

    @property
    def num_nodes(self) -> int:
        return len(self.class_scores)

    @property
    def num_classes(self) -> int:
        return self.class_scores.shape[1]


@dataclass(frozen=True)
class ClusteringParams:
    """Knobs of the graph clustering problem and its solver.

    Defaults follow the published tuned operating point
    (lam=10, eta=5e-2, epsilon=1e-4).
    """

    lam: float = 10.0
    eta: float = 5e-2
    epsilon: float = 1e-4
    max_outer_iterations: int = 10
    split_iterations: int = 2
    relative_energy_tolerance: float = 1e-4
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.lam > 0:
            raise ParameterError("lambda must be > 0")
        if self.eta < 0:
            raise ParameterError("eta must be >= 0")
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be > 0")
        if not self.relative_energy_tolerance > 0:
            raise ParameterError("relative_energy_tolerance must be > 0")
        if self.max_outer_iterations < 1 or self.split_iterations < 1:
            raise ParameterError("iteration counts must be >= 1")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")


@dataclass(frozen=True)
class PanopticLabels:
    """Per-node (class id, object index) pairs under the stuff/thing convention."""

    class_id: np.ndarray
    object_id: np.ndarray

    def __post_init__(self):
        c = _as_int_labels(self.class_id, "class_id")
        o = _as_int_labels(self.object_id, "object_id")
        if len(c) != len(o):
            raise DataError("class_id and object_id lengths differ")
        c.setflags(write=False)
        o.setflags(write=False)
        object.__setattr__(self, "class_id", c)
        object.__setattr__(self, "object_id", o)

    def __len__(self) -> int:
        return len(self.class_id)

    def validate(self, table: ClassTable) -> list[str]:
        """Check the stuff/thing index convention; returns violations."""
        return _validate_labels(self.class_id, self.object_id, table)


def _validate_labels(semantic, objects, table: ClassTable) -> list[str]:
    violations = []
    C = table.num_classes
    labeled = (semantic != IGNORE) & (objects != IGNORE)
    sem = semantic[labeled]
    obj = objects[labeled]
    bad_class = (sem < 0) | (sem >= C)
    if np.any(bad_class):
        violations.append(
            f"{int(bad_class.sum())} points with class id outside [0, {C})"
        )
        keep = ~bad_class
        sem, obj = sem[keep], obj[keep]
    if np.any(obj < 0):
        violations.append(f"{int((obj < 0).sum())} points with negative object index")
        keep = obj >= 0
        sem, obj = sem[keep], obj[keep]
    # One class per object index.
    for o in np.unique(obj):
        classes = np.unique(sem[obj == o])
        if len(classes) > 1:
            violations.append(
                f"object {int(o)} spans classes {sorted(int(c) for c in classes)}"
            )
    # Stuff classes: exactly the reserved shared index.
    for c in range(C):
        if table.is_thing[c]:
            continue
        ids = np.unique(obj[sem == c])
        bad = [int(i) for i in ids if i != table.stuff_index(c)]
        if bad:
            violations.append(
                f"stuff class {c} ({table.names[c]}) uses object ids {bad} "
                f"instead of the reserved index {table.stuff_index(c)}"
            )
    # Thing objects must not sit in the reserved stuff range.
    thing_mask = table.is_thing[np.clip(sem, 0, C - 1)]
    if np.any(thing_mask & (obj < C)):
        violations.append("thing points using object ids from the reserved stuff range")
    return violations


def validate_ground_truth(cloud: PointCloud, table: ClassTable) -> list[str]:
    """Check a labeled cloud against the shared-stuff-index convention.

    Returns a list of human-readable violations; an empty list means valid.
    """
    if cloud.semantic is None or cloud.object is None:
        raise DataError("ground-truth validation needs semantic and object labels")
    return _validate_labels(cloud.semantic, cloud.object, table)


def normalize_scores(raw) -> np.ndarray:
    """Row-wise softmax of raw per-node scores; rows sum to 1 and stay positive."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim == 1:
        raw = raw[None, :]
    if not np.all(np.isfinite(raw)):
        raise NumericError("raw scores contain non-finite values")
    shifted = raw - raw.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)
