"""File formats: PLY point clouds, binary class-score files, label and
partition tables.  All writers are atomic (temp file + rename) and
round-trip bit-exactly."""

from __future__ import annotations

import json
import os
import struct
import tempfile

import numpy as np

from .core import IGNORE, ClassTable, PanopticLabels, PointCloud
from .cutpursuit import Partition
from .errors import DataError

SCORES_MAGIC = b"SCLS"
SCORES_VERSION = 1


def atomic_write(path, data: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# PLY


def _labels_to_disk(arr):
    """IGNORE -> -1, int32 on disk."""
    out = np.where(arr == IGNORE, -1, arr).astype(np.int32)
    return out


def _labels_from_disk(arr):
    a = np.asarray(arr, dtype=np.int64)
    return np.where(a < 0, IGNORE, a)


def write_ply(path, cloud: PointCloud, binary: bool = True) -> None:
    """PLY with float64 x y z, optional uint8 rgb, int32 semantic_class and
    object_id (-1 marks IGNORE)."""
    n = len(cloud)
    props = ["property double x", "property double y", "property double z"]
    fields = [("f8", cloud.positions[:, 0]), ("f8", cloud.positions[:, 1]),
              ("f8", cloud.positions[:, 2])]
    if cloud.colors is not None:
        props += ["property uchar red", "property uchar green", "property uchar blue"]
        fields += [("u1", cloud.colors[:, 0]), ("u1", cloud.colors[:, 1]),
                   ("u1", cloud.colors[:, 2])]
    if cloud.semantic is not None:
        props.append("property int semantic_class")
        fields.append(("i4", _labels_to_disk(cloud.semantic)))
    if cloud.object is not None:
        props.append("property int object_id")
        fields.append(("i4", _labels_to_disk(cloud.object)))
    fmt = "binary_little_endian" if binary else "ascii"
    header = "\n".join(
        ["ply", f"format {fmt} 1.0", f"element vertex {n}"] + props + ["end_header", ""])
    if binary:
        rec = np.dtype([(f"f{i}", "<" + t) for i, (t, _) in enumerate(fields)])
        body = np.empty(n, dtype=rec)
        for i, (_, col) in enumerate(fields):
            body[f"f{i}"] = col
        atomic_write(path, header.encode("ascii") + body.tobytes())
    else:
        lines = []
        cols = [col for _, col in fields]
        types = [t for t, _ in fields]
        for i in range(n):
            parts = []
            for t, col in zip(types, cols):
                v = col[i]
                parts.append(repr(float(v)) if t == "f8" else str(int(v)))
            lines.append(" ".join(parts))
        atomic_write(path, header.encode("ascii") + ("\n".join(lines) + "\n").encode("ascii"))


def read_ply(path) -> PointCloud:
    with open(path, "rb") as f:
        data = f.read()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply") or end < 0:
        raise DataError(f"{path}: not a PLY file")
    header_lines = data[:end].decode("ascii", "replace").splitlines()
    body = data[end + len(b"end_header\n"):]
    fmt = None
    n = None
    props = []
    in_vertex = False
    for lineno, line in enumerate(header_lines, start=1):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                n = int(tok[2])
        elif tok[0] == "property" and in_vertex:
            if tok[1] == "list":
                raise DataError(f"{path} line {lineno}: list properties unsupported")
            props.append((tok[1], tok[2]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise DataError(f"{path}: unsupported PLY format {fmt!r}")
    if n is None:
        raise DataError(f"{path}: no vertex element")
    typemap = {"double": "f8", "float64": "f8", "float": "f4", "float32": "f4",
               "uchar": "u1", "uint8": "u1", "int": "i4", "int32": "i4"}
    try:
        rec = np.dtype([(name, "<" + typemap[t]) for t, name in props])
    except KeyError as e:
        raise DataError(f"{path}: unsupported property type {e}") from None
    if fmt == "binary_little_endian":
        if len(body) < n * rec.itemsize:
            raise DataError(f"{path}: truncated body")
        table = np.frombuffer(body[: n * rec.itemsize], dtype=rec)
    else:
        rows = body.decode("ascii", "replace").split("\n")
        vals = []
        for lineno, row in enumerate(rows, start=len(header_lines) + 2):
            row = row.strip()
            if not row:
                continue
            parts = row.split()
            if len(parts) != len(props):
                raise DataError(f"{path} line {lineno}: expected {len(props)} values")
            vals.append(parts)
        if len(vals) != n:
            raise DataError(f"{path}: expected {n} vertices, found {len(vals)}")
        table = np.zeros(n, dtype=rec)
        cols = list(zip(*vals)) if vals else []
        for (t, name), col in zip(props, cols):
            table[name] = np.asarray(col, dtype=rec[name])
    names = {name for _, name in props}
    if not {"x", "y", "z"} <= names:
        raise DataError(f"{path}: missing x/y/z")
    pos = np.column_stack([table["x"], table["y"], table["z"]]).astype(np.float64)
    colors = None
    if {"red", "green", "blue"} <= names:
        colors = np.column_stack([table["red"], table["green"], table["blue"]])
    semantic = _labels_from_disk(table["semantic_class"]) if "semantic_class" in names else None
    objects = _labels_from_disk(table["object_id"]) if "object_id" in names else None
    return PointCloud(pos, colors, semantic, objects)


# ---------------------------------------------------------------------------
# Class scores (binary) and agreements (CSV)


def write_scores(path, scores) -> None:
    s = np.ascontiguousarray(np.asarray(scores, dtype=np.float64))
    if s.ndim != 2:
        raise DataError("scores must be N x C")
    header = SCORES_MAGIC + struct.pack("<IQI", SCORES_VERSION, s.shape[0], s.shape[1])
    atomic_write(path, header + s.astype("<f8").tobytes())


def read_scores(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != SCORES_MAGIC:
        raise DataError(f"{path}: bad magic, not a scores file")
    version, n, c = struct.unpack_from("<IQI", data, 4)
    if version != SCORES_VERSION:
        raise DataError(f"{path}: unsupported scores version {version}")
    offset = 4 + struct.calcsize("<IQI")
    expected = n * c * 8
    if len(data) - offset != expected:
        raise DataError(f"{path}: truncated scores payload")
    return np.frombuffer(data, dtype="<f8", offset=offset).reshape(n, c).copy()


def write_agreements_csv(path, edges, agreements) -> None:
    lines = ["src,dst,agreement"]
    for (u, v), a in zip(edges, agreements):
        lines.append(f"{u},{v},{float(a)!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_agreements_csv(path):
    with open(path) as f:
        header = f.readline().strip()
        if header != "src,dst,agreement":
            raise DataError(f"{path}: unexpected header {header!r}")
        us, vs, ags = [], [], []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise DataError(f"{path} line {lineno}: expected 3 fields")
            us.append(int(parts[0])); vs.append(int(parts[1])); ags.append(float(parts[2]))
    return np.column_stack([us, vs]).astype(np.int64) if us else np.zeros((0, 2), np.int64), \
        np.asarray(ags, dtype=np.float64)


# ---------------------------------------------------------------------------
# Labels, superpoints, partitions


def write_labels_csv(path, labels: PanopticLabels) -> None:
    lines = ["point_id,class_id,object_id"]
    disk_c = _labels_to_disk(labels.class_id)
    disk_o = _labels_to_disk(labels.object_id)
    for i in range(len(labels)):
        lines.append(f"{i},{disk_c[i]},{disk_o[i]}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_labels_csv(path) -> PanopticLabels:
    with open(path) as f:
        header = f.readline().strip()
        if header != "point_id,class_id,object_id":
            raise DataError(f"{path}: unexpected header {header!r}")
        cs, os_ = [], []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise DataError(f"{path} line {lineno}: expected 3 fields")
            cs.append(int(parts[1])); os_.append(int(parts[2]))
    return PanopticLabels(_labels_from_disk(np.asarray(cs)),
                          _labels_from_disk(np.asarray(os_)))


def write_superpoints_csv(path, point_to_superpoint) -> None:
    lines = ["point_id,superpoint_id"]
    for i, s in enumerate(point_to_superpoint):
        lines.append(f"{i},{int(s)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_superpoints_csv(path) -> np.ndarray:
    with open(path) as f:
        header = f.readline().strip()
        if header != "point_id,superpoint_id":
            raise DataError(f"{path}: unexpected header {header!r}")
        out = []
        for lineno, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise DataError(f"{path} line {lineno}: expected 2 fields")
            out.append(int(parts[1]))
    return np.asarray(out, dtype=np.int64)


def write_partition(csv_path, json_path, partition: Partition) -> None:
    """CSV node->component plus a JSON sidecar with component summaries."""
    lines = ["node_id,component_id"]
    for i, k in enumerate(partition.assignment):
        lines.append(f"{i},{int(k)}")
    atomic_write_text(csv_path, "\n".join(lines) + "\n")
    sizes = partition.component_sizes()
    sidecar = {
        str(k): {
            "class_distribution": [float(v) for v in partition.class_values[k]],
            "position": [float(v) for v in partition.pos_values[k]],
            "size": int(sizes[k]),
        }
        for k in range(partition.num_components)
    }
    atomic_write_text(json_path, json.dumps(
        {"energy": partition.energy, "components": sidecar}, indent=2) + "\n")


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise DataError(f"{path} line {e.lineno}: {e.msg}") from None


def read_class_table(path) -> ClassTable:
    d = read_json(path)
    if "names" not in d or "is_thing" not in d:
        raise DataError(f"{path}: class table needs 'names' and 'is_thing'")
    return ClassTable.from_dict(d)
