"""Command-line frontend.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
All outputs are written atomically; SUPERCUT_LOG controls verbosity.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from importlib import metadata

import numpy as np

from . import io as scio
from .core import ClassTable, ClusteringParams, PanopticLabels
from .errors import DataError, NumericError, ParameterError
from .matchbench import bench_matching
from .metrics import panoptic_quality
from .panoptic import PipelineConfig, grid_search, run_pipeline
from .scenegen import SceneSpec, default_class_table, generate_scene
from .superpoints import SuperpointPartition

log = logging.getLogger("supercut")


def _version() -> str:
    try:
        return metadata.version("supercut")
    except metadata.PackageNotFoundError:
        return "unknown"


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _add_cluster_flags(p):
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--knn", type=int, default=None)
    p.add_argument("--sp-reg", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--config", help="pipeline config JSON")


_CONFIG_KEYS = {"lambda", "eta", "epsilon", "knn_k", "superpoint_regularization",
                "scores_source", "agreement_source", "corruption_rate", "seed"}


def _pipeline_config(args, table: ClassTable) -> PipelineConfig:
    cfg = {}
    if getattr(args, "config", None):
        cfg = scio.read_json(args.config)
        unknown = set(cfg) - _CONFIG_KEYS
        if unknown:
            raise DataError(f"{args.config}: unknown config keys {sorted(unknown)}")

    def pick(flag, key, default):
        v = getattr(args, flag, None)
        if v is not None:
            return v
        return cfg.get(key, default)

    params = ClusteringParams(
        lam=float(pick("lam", "lambda", 10.0)),
        eta=float(pick("eta", "eta", 5e-2)),
        epsilon=float(pick("epsilon", "epsilon", 1e-4)),
        seed=int(pick("seed", "seed", 0)),
        workers=max(1, getattr(args, "threads", 1)),
    )
    scores_source = cfg.get("scores_source", "oracle")
    agreement_source = cfg.get("agreement_source", "oracle")
    if getattr(args, "scores", None):
        scores_source = args.scores
    if getattr(args, "oracle_class", False):
        scores_source = "oracle"
    if getattr(args, "agreements", None):
        agreement_source = args.agreements
    if getattr(args, "oracle_agreement", False):
        agreement_source = "oracle"
    corrupt = getattr(args, "corrupt", None)
    rate = float(corrupt if corrupt is not None else cfg.get("corruption_rate", 0.0))
    if rate > 0 and agreement_source == "oracle":
        agreement_source = "noisy-oracle"
    return PipelineConfig(
        table=table,
        params=params,
        knn_k=int(pick("knn", "knn_k", 8)),
        superpoint_regularization=float(pick("sp_reg", "superpoint_regularization", 0.02)),
        scores_source=scores_source,
        agreement_source=agreement_source,
        corruption_rate=rate,
    )


def _load_table(args) -> ClassTable:
    if getattr(args, "classes", None):
        return scio.read_class_table(args.classes)
    return default_class_table()


def _manifest(args_ns, config: PipelineConfig, inputs, outputs, timings):
    return {
        "tool": "supercut",
        "version": _version(),
        "command": args_ns.command,
        "config": {
            "lambda": config.params.lam,
            "eta": config.params.eta,
            "epsilon": config.params.epsilon,
            "knn_k": config.knn_k,
            "superpoint_regularization": config.superpoint_regularization,
            "scores_source": config.scores_source
            if isinstance(config.scores_source, str) else "file",
            "agreement_source": config.agreement_source
            if isinstance(config.agreement_source, str) else "file",
            "corruption_rate": config.corruption_rate,
            "seed": config.params.seed,
        },
        "input_hashes": {p: _sha256(p) for p in inputs},
        "outputs": outputs,
        "timings_ms": timings,
    }


# ---------------------------------------------------------------------------
# Commands


def cmd_generate(args) -> int:
    spec_d = scio.read_json(args.spec)
    table = ClassTable.from_dict(spec_d["table"]) if "table" in spec_d \
        else default_class_table()
    kwargs = {k: v for k, v in spec_d.items() if k != "table"}
    if "points_per_object" in kwargs:
        kwargs["points_per_object"] = tuple(kwargs["points_per_object"])
    spec = SceneSpec(table=table, **kwargs)
    cloud = generate_scene(spec)
    scio.write_ply(args.out, cloud)
    classes_path = os.path.splitext(args.out)[0] + ".classes.json"
    scio.write_json(classes_path, table.to_dict())
    log.info("wrote %s (%d points) and %s", args.out, len(cloud), classes_path)
    return 0


def cmd_partition(args) -> int:
    cloud = scio.read_ply(args.ply)
    table = _load_table(args)
    config = _pipeline_config(args, table)
    from .graphs import build_knn_graph
    from .panoptic import default_features
    from .superpoints import compute_superpoints
    graph = build_knn_graph(cloud.positions, config.knn_k,
                            workers=config.params.workers)
    sp = compute_superpoints(default_features(cloud), graph,
                             config.superpoint_regularization,
                             positions=cloud.positions, params=config.params)
    scio.write_superpoints_csv(args.out, sp.point_to_superpoint)
    log.info("wrote %s (%d superpoints)", args.out, sp.num_superpoints)
    return 0


def cmd_cluster(args) -> int:
    cloud = scio.read_ply(args.ply)
    table = _load_table(args)
    config = _pipeline_config(args, table)
    inputs = [args.ply]
    if isinstance(config.scores_source, str) and config.scores_source not in (
            "oracle", "noisy-oracle"):
        inputs.append(config.scores_source)
        config = replace(config, scores_source=scio.read_scores(config.scores_source))
    if isinstance(config.agreement_source, str) and config.agreement_source not in (
            "oracle", "noisy-oracle"):
        inputs.append(config.agreement_source)
        _, ag = scio.read_agreements_csv(config.agreement_source)
        config = replace(config, agreement_source=ag)
    sp = None
    if args.superpoints:
        inputs.append(args.superpoints)
        sp = SuperpointPartition(scio.read_superpoints_csv(args.superpoints))
    result = run_pipeline(cloud, config, superpoints=sp)
    os.makedirs(args.out_dir, exist_ok=True)
    labels_path = os.path.join(args.out_dir, "labels.csv")
    part_csv = os.path.join(args.out_dir, "partition.csv")
    part_json = os.path.join(args.out_dir, "partition.json")
    manifest_path = os.path.join(args.out_dir, "manifest.json")
    scio.write_labels_csv(labels_path, result.point_labels)
    scio.write_partition(part_csv, part_json, result.partition)
    manifest = _manifest(args, config, inputs,
                         [labels_path, part_csv, part_json], result.timings_ms)
    scio.write_json(manifest_path, manifest)
    log.info("clustered %d points into %d components (energy %.6g)",
             len(cloud), result.partition.num_components, result.partition.energy)
    return 0


def cmd_eval(args) -> int:
    pred = scio.read_labels_csv(args.pred)
    gt = scio.read_ply(args.gt)
    table = _load_table(args)
    m = panoptic_quality(pred, gt, table)
    scio.write_json(args.out, m.to_dict(table))
    log.info("PQ %.2f RQ %.2f SQ %.2f mIoU %.2f", m.pq, m.rq, m.sq, m.miou)
    return 0


def cmd_tune(args) -> int:
    with open(args.scenes) as f:
        paths = [line.strip() for line in f if line.strip()]
    if not paths:
        raise DataError(f"{args.scenes}: empty scene list")
    scenes = [scio.read_ply(p) for p in paths]
    grid = scio.read_json(args.grid)
    table = _load_table(args)
    config = _pipeline_config(args, table)
    best, rows = grid_search(scenes, grid.get("lambda", [config.params.lam]),
                             grid.get("eta", [config.params.eta]),
                             grid.get("epsilon", [config.params.epsilon]), config)
    scio.write_json(args.out_params, {
        "lambda": best.lam, "eta": best.eta, "epsilon": best.epsilon})
    lines = ["lambda,eta,epsilon,mean_pq"]
    for lam, eta, eps, pq in rows:
        lines.append(f"{lam!r},{eta!r},{eps!r},{pq!r}")
    scio.atomic_write_text(args.out_table, "\n".join(lines) + "\n")
    log.info("best cell lambda=%g eta=%g epsilon=%g", best.lam, best.eta, best.epsilon)
    return 0


def cmd_bench_matching(args) -> int:
    sizes_doc = scio.read_json(args.sizes)
    sizes = [(int(a), int(b)) for a, b in sizes_doc["sizes"]]
    rows = bench_matching(sizes, repeats=args.repeats, seed=args.seed or 0)
    lines = ["method,n_true,n_pred,median_seconds"]
    for method, nt, np_, sec in rows:
        lines.append(f"{method},{nt},{np_},{sec!r}")
    scio.atomic_write_text(args.out, "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ParameterError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="supercut",
                description="Panoptic point-cloud segmentation by graph clustering")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="synthesize a labeled scene")
    g.add_argument("spec", help="scene spec JSON")
    g.add_argument("--out", required=True, help="output PLY path")
    g.set_defaults(func=cmd_generate)

    pt = sub.add_parser("partition", help="compute superpoints")
    pt.add_argument("ply")
    pt.add_argument("--classes")
    pt.add_argument("--out", required=True)
    _add_cluster_flags(pt)
    pt.set_defaults(func=cmd_partition)

    c = sub.add_parser("cluster", help="run the panoptic pipeline")
    c.add_argument("ply")
    c.add_argument("--classes")
    c.add_argument("--superpoints", help="precomputed point_id,superpoint_id CSV")
    c.add_argument("--scores", help="binary class-score file")
    c.add_argument("--agreements", help="agreement CSV")
    c.add_argument("--oracle-class", action="store_true")
    c.add_argument("--oracle-agreement", action="store_true")
    c.add_argument("--corrupt", type=float, default=None, metavar="RATE")
    c.add_argument("--out-dir", required=True)
    _add_cluster_flags(c)
    c.set_defaults(func=cmd_cluster)

    e = sub.add_parser("eval", help="score predictions against ground truth")
    e.add_argument("pred", help="labels CSV")
    e.add_argument("gt", help="ground-truth PLY")
    e.add_argument("--classes")
    e.add_argument("--out", required=True, help="metrics JSON path")
    e.set_defaults(func=cmd_eval)

    t = sub.add_parser("tune", help="grid-search clustering parameters")
    t.add_argument("scenes", help="text file listing ground-truth PLY paths")
    t.add_argument("grid", help="JSON with lambda/eta/epsilon lists")
    t.add_argument("--classes")
    t.add_argument("--out-params", required=True)
    t.add_argument("--out-table", required=True)
    _add_cluster_flags(t)
    t.set_defaults(func=cmd_tune)

    b = sub.add_parser("bench-matching", help="Hungarian vs clustering timings")
    b.add_argument("sizes", help='JSON {"sizes": [[n_true, n_pred], ...]}')
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bench_matching)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("SUPERCUT_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ParameterError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError, KeyError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 2
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
