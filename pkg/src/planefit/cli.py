"""Command line interface: generate scenes, reconstruct, evaluate, sweep.

Exit codes: 0 on success, 1 on a diagnosed error, 2 on usage errors.
The PLANEFIT_THREADS environment variable caps any parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cloud_io
from .cloud_io import CloudFormatError, grid_downsample, read_cloud
from .geometry import PointCloud, build_knn_graph
from .metrics import (GroundTruth, consistency_errors, normal_rms_error,
                      plane_distance_rms, projection_rms)
from .planes import LabeledCloud, extract_planes
from .reconstruct import (ReconstructionConfig, ReconstructionResult,
                          count_distinct_normals, reconstruct_normals)
from .selection import NoPlaneSupportError
from .synthetic import SyntheticScene, corrupt, gen_lines_2d, sample_polyhedron


@dataclass
class RunReport:
    """Structured record of one reconstruction run.

    Serializes with a fixed key order: config, input, num_normals,
    num_planes, timings_ms, iterations, metrics.
    """

    config: dict
    input: dict
    num_normals: int
    num_planes: int
    timings_ms: dict
    iterations: list = field(default_factory=list)
    metrics: dict | None = None

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "input": self.input,
            "num_normals": self.num_normals,
            "num_planes": self.num_planes,
            "timings_ms": self.timings_ms,
            "iterations": self.iterations,
            "metrics": self.metrics,
        }
        return json.dumps(payload, indent=2)


def _max_workers(requested: int) -> int:
    cap = os.environ.get("PLANEFIT_THREADS")
    if cap:
        try:
            requested = min(requested, max(1, int(cap)))
        except ValueError:
            pass
    return max(1, requested)


def build_report(config: ReconstructionConfig, input_info: dict,
                 result: ReconstructionResult, num_planes: int,
                 metrics: dict | None = None) -> RunReport:
    return RunReport(
        config={"k": config.k, "tau": config.tau,
                "lambda_l": config.lambda_l, "lambda_g": config.lambda_g,
                "lambda_floor": config.lambda_floor},
        input=input_info,
        num_normals=count_distinct_normals(result),
        num_planes=num_planes,
        timings_ms={k: round(v * 1000.0, 3) for k, v in result.timings.items()},
        iterations=[{"lambda": it.lam, "lambda_eff": it.lambda_eff,
                     "regions": it.regions_after_fuse,
                     "candidates": it.retained_candidates,
                     "selected": it.num_selected} for it in result.trace],
        metrics=metrics,
    )


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def _generate_scene(args) -> SyntheticScene:
    if args.scene == "lines2d":
        scene = gen_lines_2d(points_per_line=args.points_per_line,
                             sigma=args.sigma, outlier_fraction=args.rho,
                             seed=args.seed)
    else:
        scene = sample_polyhedron(args.scene, n=args.n,
                                  noise_factor=args.noise, seed=args.seed)
    if args.extra_outliers:
        scene = corrupt(scene, args.extra_outliers, seed=args.seed + 1)
    return scene


def cmd_generate(args) -> int:
    scene = _generate_scene(args)
    os.makedirs(args.out, exist_ok=True)
    cloud = scene.cloud
    if args.no_normals and cloud.normals is not None:
        cloud = PointCloud(cloud.points)
    if args.format == "ply":
        cloud_io.write_ply(os.path.join(args.out, "cloud.ply"), cloud)
    else:
        cloud_io.write_cloud_xyz(os.path.join(args.out, "cloud.xyz"), cloud)
    cloud_io.write_cloud_xyz(os.path.join(args.out, "truth.xyz"), scene.truth.cloud)
    cloud_io.write_labels_txt(os.path.join(args.out, "truth_labels.txt"),
                              scene.truth.labels)
    with open(os.path.join(args.out, "scene.json"), "w", encoding="utf-8") as fh:
        json.dump(scene.params, fh, indent=2)
        fh.write("\n")
    print(f"wrote scene of {len(scene.cloud)} points to {args.out}")
    return 0


def _config_from_args(args) -> ReconstructionConfig:
    return ReconstructionConfig(
        k=args.k, tau=args.tau, lambda_l=args.lambda_l,
        lambda_g=args.lambda_g, lambda_floor=args.lambda_floor,
        workers=_max_workers(getattr(args, "jobs", 1)))


def cmd_reconstruct(args) -> int:
    cloud = read_cloud(args.input, dim=args.dim)
    info = {"path": os.fspath(args.input), "points": len(cloud),
            "dim": cloud.dimension}
    if args.downsample:
        cloud, kept = grid_downsample(cloud, args.downsample)
        info["downsampled_points"] = len(cloud)
        info["downsample_cell"] = args.downsample
    if args.no_normals and cloud.normals is not None:
        cloud = PointCloud(cloud.points)
    config = _config_from_args(args)
    result = reconstruct_normals(cloud, config)
    graph = build_knn_graph(cloud, config.k, workers=config.workers)
    planes, labeled = extract_planes(cloud, graph, result, config.tau)
    report = build_report(config, info, result, len(planes))
    cloud_io.write_outputs(planes, labeled, report, args.out)
    print(f"{len(planes)} planes, {count_distinct_normals(result)} distinct "
          f"normals, outputs in {args.out}")
    return 0


def _load_truth(truth_path, labels_path, dim) -> GroundTruth:
    truth_cloud = read_cloud(truth_path, dim=dim)
    labels = cloud_io.read_labels_txt(labels_path)
    if len(labels) != len(truth_cloud):
        raise CloudFormatError(
            f"{labels_path}: {len(labels)} labels for {len(truth_cloud)} "
            "truth points")
    return GroundTruth(cloud=truth_cloud, inlier_mask=labels >= 0, labels=labels)


def compute_metrics(result_dir, truth: GroundTruth, dim: int) -> dict:
    """Metric block for an on-disk run against a ground truth.

    The normal error needs index correspondence with the truth and is
    omitted when the point counts differ (for example after
    downsampling); the same goes for the consistency pair.
    """
    planes = cloud_io.read_planes_txt(os.path.join(result_dir, "planes.txt"),
                                      dim=dim)
    labels = cloud_io.read_labels_txt(os.path.join(result_dir, "labels.txt"))
    recon = read_cloud(os.path.join(result_dir, "reconstruction.ply"), dim=dim)
    if len(labels) != len(recon):
        raise CloudFormatError(f"{result_dir}: labels and cloud sizes differ")
    labeled = LabeledCloud(recon, labels)

    out = {}
    if not planes:
        raise NoPlaneSupportError(f"{result_dir}: empty plane list")
    out["plane_dist_rms"] = plane_distance_rms(truth, planes)
    out["projection_rms"] = projection_rms(labeled, planes, truth)
    if len(recon) == len(truth.cloud):
        if recon.normals is not None:
            out["normal_rms_deg"] = normal_rms_error(recon.normals, truth)
        if truth.labels is not None:
            gce, lce = consistency_errors(labels, truth.labels)
            out["gce"] = gce
            out["lce"] = lce
    return out


def cmd_evaluate(args) -> int:
    truth = _load_truth(args.truth, args.truth_labels, args.dim)
    metrics = compute_metrics(args.result, truth, args.dim)
    out_path = args.out or os.path.join(args.result, "metrics.csv")
    keys = ["normal_rms_deg", "plane_dist_rms", "projection_rms", "gce", "lce"]
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(keys)
        writer.writerow([f"{metrics[k]:.9g}" if k in metrics else "" for k in keys])
    for k in keys:
        if k in metrics:
            print(f"{k} = {metrics[k]:.6g}")
    print(f"metrics written to {out_path}")
    return 0


def _sweep_one(task) -> dict:
    scene_name, sigma, rho, noise, lambda_g, base = task
    if scene_name == "lines2d":
        scene = gen_lines_2d(points_per_line=base["points_per_line"],
                             sigma=sigma, outlier_fraction=rho,
                             seed=base["seed"])
        dim = 2
    else:
        scene = sample_polyhedron(scene_name, n=base["n"], noise_factor=noise,
                                  seed=base["seed"])
        dim = 3
    cloud = scene.cloud
    if base["estimate_normals"] and cloud.normals is not None:
        cloud = PointCloud(cloud.points)
    config = ReconstructionConfig(k=base["k"], tau=base["tau"],
                                  lambda_l=base["lambda_l"], lambda_g=lambda_g,
                                  lambda_floor=base["lambda_floor"])
    t0 = time.perf_counter()
    result = reconstruct_normals(cloud, config)
    graph = build_knn_graph(cloud, config.k)
    planes, labeled = extract_planes(cloud, graph, result, config.tau)
    elapsed = time.perf_counter() - t0
    row = {"scene": scene_name, "sigma": sigma, "rho": rho, "noise": noise,
           "lambda_g": lambda_g, "points": len(cloud),
           "num_normals": count_distinct_normals(result),
           "num_planes": len(planes), "seconds": round(elapsed, 3)}
    truth = scene.truth
    if planes:
        row["plane_dist_rms"] = plane_distance_rms(truth, planes)
        row["projection_rms"] = projection_rms(labeled, planes, truth)
        row["normal_rms_deg"] = normal_rms_error(labeled.cloud.normals, truth)
        if truth.labels is not None:
            gce, lce = consistency_errors(labeled.labels, truth.labels)
            row["gce"] = gce
            row["lce"] = lce
    _ = dim
    return row


def cmd_sweep(args) -> int:
    base = {"points_per_line": args.points_per_line, "n": args.n,
            "seed": args.seed, "k": args.k, "tau": args.tau,
            "lambda_l": args.lambda_l, "lambda_floor": args.lambda_floor,
            "estimate_normals": args.no_normals}
    sigmas = args.sigma or [0.0]
    rhos = args.rho or [0.0]
    noises = args.noise or [0.0]
    if args.scene == "lines2d":
        tasks = [(args.scene, s, r, 0.0, lg, base)
                 for s in sigmas for r in rhos for lg in args.lambda_g]
    else:
        tasks = [(args.scene, 0.0, 0.0, nz, lg, base)
                 for nz in noises for lg in args.lambda_g]

    jobs = _max_workers(args.jobs)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, tasks))
    else:
        rows = [_sweep_one(t) for t in tasks]

    fields = ["scene", "sigma", "rho", "noise", "lambda_g", "points",
              "num_normals", "num_planes", "normal_rms_deg",
              "plane_dist_rms", "projection_rms", "gce", "lce", "seconds"]
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k, "") for k in fields})
    print(f"{len(rows)} sweep rows written to {args.out}")
    return 0


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------

def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=10, help="neighbors per point")
    p.add_argument("--tau", type=int, default=100,
                   help="minimal points supporting a plane")
    p.add_argument("--lambda-l", type=float, default=10.0, dest="lambda_l",
                   help="terminal local regularization weight")
    p.add_argument("--lambda-g", type=float, default=1000.0, dest="lambda_g",
                   help="global direction-count regularization multiplier")
    p.add_argument("--lambda-floor", type=float, default=1e-4,
                   dest="lambda_floor", help="lower clamp for the initial weight")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planefit",
        description="Plane and line reconstruction from point clouds "
                    "under a shared-direction budget")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic scene to disk")
    g.add_argument("scene", choices=["lines2d", "cube", "dodecahedron"])
    g.add_argument("--points-per-line", type=int, default=100)
    g.add_argument("--sigma", type=float, default=0.0,
                   help="Gaussian noise for lines2d")
    g.add_argument("--rho", type=float, default=0.0,
                   help="outlier fraction for lines2d")
    g.add_argument("--n", type=int, default=100000,
                   help="sample count for polyhedra")
    g.add_argument("--noise", type=float, default=0.0,
                   help="noise factor (times box diagonal) for polyhedra")
    g.add_argument("--extra-outliers", type=int, default=0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--format", choices=["xyz", "ply"], default="xyz")
    g.add_argument("--no-normals", action="store_true",
                   help="strip normals from the written cloud")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("reconstruct", help="run the reconstruction pipeline")
    r.add_argument("input")
    r.add_argument("--dim", type=int, choices=[2, 3], default=3)
    _add_config_flags(r)
    r.add_argument("--downsample", type=float, default=0.0, metavar="CELL",
                   help="grid downsampling cell size (0 = off)")
    r.add_argument("--no-normals", action="store_true",
                   help="ignore input normals and re-estimate them")
    r.add_argument("--jobs", type=int, default=1,
                   help="worker threads for neighbor queries")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_reconstruct)

    e = sub.add_parser("evaluate", help="score a result directory against truth")
    e.add_argument("--result", required=True)
    e.add_argument("--truth", required=True, help="truth cloud (points + normals)")
    e.add_argument("--truth-labels", required=True)
    e.add_argument("--dim", type=int, choices=[2, 3], default=3)
    e.add_argument("--out", default=None, help="metrics CSV path")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("sweep", help="grid of runs, one CSV row each")
    s.add_argument("--scene", choices=["lines2d", "cube", "dodecahedron"],
                   default="lines2d")
    s.add_argument("--sigma", type=float, nargs="*", default=None)
    s.add_argument("--rho", type=float, nargs="*", default=None)
    s.add_argument("--noise", type=float, nargs="*", default=None)
    s.add_argument("--lambda-g", type=float, nargs="+", dest="lambda_g",
                   required=True)
    s.add_argument("--points-per-line", type=int, default=100)
    s.add_argument("--n", type=int, default=20000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--tau", type=int, default=100)
    s.add_argument("--lambda-l", type=float, default=10.0, dest="lambda_l")
    s.add_argument("--lambda-floor", type=float, default=1e-4,
                   dest="lambda_floor")
    s.add_argument("--no-normals", action="store_true")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args) or 0
    except (CloudFormatError, NoPlaneSupportError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
