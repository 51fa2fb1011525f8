"""Command-line front end: ``sonarblob {simulate,detect,evaluate,sweep}``.

Exit codes: 0 success, 1 parameter error, 2 I/O error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import logging
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as sio
from .classify import ClusterReport
from .config import RunConfig, load_config
from .errors import NumericalError, ParameterError
from .evaluate import (
    CLUTTER_KIND,
    TARGET_KIND,
    GroundTruth,
    MetricsTable,
    aggregate,
    scenario_detection,
    scenario_seed,
    sweep,
)
from .pipeline import process_block
from .signalproc import PingRecord, PointCloud
from .simulate import make_scenario, synth_block

log = logging.getLogger("sonarblob")

EXIT_OK, EXIT_PARAM, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

SIGNAL_SIDECAR = "signal.json"
TRUTH_SIDECAR = "truth.json"
MANIFEST = "manifest.json"
_PING_RE = re.compile(r"^ping_(\d+)\.(f32|raw|wav)$")


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, master_seed=args.seed)
    return cfg


def _map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


# simulate

def _write_scenario(task) -> list[str]:
    cfg, name, seed, has_target, out, fmt = task
    setup = cfg.setup
    scenario = make_scenario(seed, cfg.scenario, cfg.chirp, has_target, setup.clutter().identifier)
    pings = synth_block(scenario, cfg.chirp, setup.clutter())
    block = Path(out) / name
    written = []
    width = max(3, len(str(len(pings))))
    for ping in pings:
        path = block / f"ping_{ping.ping_index:0{width}d}.{fmt}"
        if fmt == "wav":
            sio.write_wav(path, ping.samples, ping.sample_rate)
        else:
            sio.write_raw(path, ping.samples)
        written.append(str(path))
    sio.write_json(block / SIGNAL_SIDECAR, {
        "sample_rate": cfg.chirp.sample_rate,
        "segment_duration": cfg.scenario.segment_duration,
        "n_pings": cfg.scenario.n_pings,
        "format": "float32le" if fmt == "f32" else "wav",
    })
    truth = scenario.truth_dict()
    truth["gate_m"] = cfg.evaluation.gate
    sio.write_json(block / TRUTH_SIDECAR, truth)
    return written + [str(block / SIGNAL_SIDECAR), str(block / TRUTH_SIDECAR)]


def cmd_simulate(args) -> int:
    cfg = _config(args)
    changes = {}
    if args.scr_db is not None:
        changes["scr_db"] = args.scr_db
    if args.valid_fraction is not None:
        changes["valid_fraction"] = args.valid_fraction
    if args.n_pings is not None:
        changes["n_pings"] = args.n_pings
    if changes:
        cfg = replace(cfg, scenario=replace(cfg.scenario, **changes))
    if args.targets < 0 or args.clutter < 0:
        raise ParameterError("scenario counts must be non-negative")
    tasks = [
        (cfg, f"target_{i:04d}", scenario_seed(cfg.master_seed, TARGET_KIND, i), True, args.out, args.format)
        for i in range(args.targets)
    ] + [
        (cfg, f"clutter_{i:04d}", scenario_seed(cfg.master_seed, CLUTTER_KIND, i), False, args.out, args.format)
        for i in range(args.clutter)
    ]
    if not tasks:
        log.info("no scenarios requested")
        return EXIT_OK
    artifacts = [p for paths in _map(_write_scenario, tasks, args.jobs) for p in paths]
    sio.write_manifest(Path(args.out) / MANIFEST, cfg.to_dict(), cfg.master_seed, artifacts)
    log.info("wrote %d scenarios to %s", len(tasks), args.out)
    return EXIT_OK


# detect

def _ping_files(block: Path) -> list[Path]:
    found = []
    for p in block.iterdir():
        m = _PING_RE.match(p.name)
        if m:
            found.append((int(m.group(1)), p))
    found.sort()
    return [p for _, p in found]


def _blocks(root: Path) -> list[Path]:
    """``root`` itself if it holds ping files, else its subdirectories that do."""
    if not root.is_dir():
        raise sio.ArtifactError(f"{root} is not a directory")
    if _ping_files(root):
        return [root]
    blocks = sorted(d for d in root.iterdir() if d.is_dir() and _ping_files(d))
    if not blocks:
        raise sio.ArtifactError(f"no ping files under {root}")
    return blocks


def load_block(block: Path, cfg: RunConfig, sample_rate: float | None = None) -> list[PingRecord]:
    sidecar = block / SIGNAL_SIDECAR
    if sample_rate is None and sidecar.exists():
        sample_rate = float(sio.read_json(sidecar)["sample_rate"])
    if sample_rate is None:
        sample_rate = cfg.chirp.sample_rate
    pings = []
    for i, path in enumerate(_ping_files(block), start=1):
        samples, rate = sio.read_signal(path, sample_rate)
        if len(samples) == 0:
            raise sio.ArtifactError(f"{path}: empty signal")
        pings.append(PingRecord(i, samples, rate, len(samples) / rate))
    return pings


def _detect_block(task) -> list[str]:
    cfg, block, out, sample_rate, dump_weights = task
    pings = load_block(Path(block), cfg, sample_rate)
    result = process_block(pings, cfg.chirp, cfg.affinity, cfg.detector)
    reports = result.reports(cfg.detector.eta_c, cfg.detector.eta_h)
    out = Path(out)
    files = [out / "points.csv", out / "clusters.csv", out / "reports.json"]
    sio.write_points(files[0], result.cloud)
    sio.write_clusters(files[1], result.cloud, result.clustering.labels)
    sio.write_reports(files[2], reports)
    if dump_weights and result.graph is not None:
        files.append(out / "weights.csv")
        sio.write_matrix(files[-1], result.graph.W)
    n_target = sum(r.label == "target" for r in reports)
    log.info("%s: %d points, %d clusters, %d target", block, len(result.cloud), len(reports), n_target)
    return [str(f) for f in files]


def cmd_detect(args) -> int:
    cfg = _config(args)
    root = Path(args.input)
    blocks = _blocks(root)
    single = blocks == [root]
    tasks = [
        (cfg, str(b), str(Path(args.out) if single else Path(args.out) / b.name), args.sample_rate, args.dump_weights)
        for b in blocks
    ]
    artifacts = [p for paths in _map(_detect_block, tasks, args.jobs) for p in paths]
    sio.write_manifest(Path(args.out) / MANIFEST, cfg.to_dict(), cfg.master_seed, artifacts)
    return EXIT_OK


# evaluate

def _detection_dirs(root: Path) -> list[Path]:
    if (root / "reports.json").exists():
        return [root]
    dirs = sorted(d for d in root.iterdir() if (d / "reports.json").exists()) if root.is_dir() else []
    if not dirs:
        raise sio.ArtifactError(f"no detection outputs under {root}")
    return dirs


def _load_detection(d: Path):
    points = sio.read_points(d / "points.csv")
    reports_raw = sio.read_reports(d / "reports.json")
    labels = sio.read_clusters(d / "clusters.csv")
    n = len(points)
    cloud = PointCloud(
        np.array([p["range_m"] for p in points], dtype=float),
        np.array([p["ping"] for p in points], dtype=int),
        np.array([p["mf_value"] for p in points], dtype=float),
        np.zeros((n, 0)),
        np.array([p["entropy_bits"] for p in points], dtype=float),
    )
    if len(labels) != n:
        raise sio.ArtifactError(f"{d}: clusters.csv and points.csv disagree")
    reports = [
        ClusterReport(
            int(r["cluster_id"]), float(r["connectivity"]), float(r["median_entropy_bits"]),
            int(r["size"]), str(r["label"]), [int(i) for i in np.flatnonzero(labels == int(r["cluster_id"]))],
        )
        for r in reports_raw
    ]
    return cloud, reports


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    det_root, truth_root = Path(args.detections), Path(args.truth)
    outcomes, scr, vf = [], set(), set()
    for d in _detection_dirs(det_root):
        tdir = truth_root if d == det_root else truth_root / d.name
        tpath = tdir / TRUTH_SIDECAR
        if not tpath.exists():
            raise sio.ArtifactError(f"missing ground truth {tpath}")
        t = sio.read_json(tpath)
        cloud, reports = _load_detection(d)
        gate = float(t.get("gate_m", cfg.evaluation.gate))
        truth = GroundTruth(np.asarray(t["path_m"], dtype=float), gate) if t["has_target"] else None
        outcomes.append(scenario_detection(reports, cloud, truth))
        if t["has_target"]:
            scr.add(float(t["scr_db"]))
            vf.add(float(t["valid_fraction"]))
    row = aggregate(
        outcomes,
        alpha=cfg.affinity.alpha, beta=cfg.affinity.beta, tau=cfg.affinity.tau,
        scr_db=scr.pop() if len(scr) == 1 else math.nan,
        valid_fraction=vf.pop() if len(vf) == 1 else math.nan,
        eta_c=cfg.detector.eta_c, eta_h=cfg.detector.eta_h,
    )
    table = MetricsTable([row], cfg.master_seed)
    table.write(args.out, {"detections": str(det_root), "truth": str(truth_root)})
    sio.write_manifest(Path(args.out).parent / MANIFEST, cfg.to_dict(), cfg.master_seed,
                       [args.out, str(args.out) + ".meta.json"])
    return EXIT_OK


# sweep

def cmd_sweep(args) -> int:
    cfg = _config(args)
    grid = cfg.grid
    if args.targets is not None or args.clutter is not None:
        grid = replace(
            grid,
            n_target=grid.n_target if args.targets is None else args.targets,
            n_clutter=grid.n_clutter if args.clutter is None else args.clutter,
        )
        cfg = replace(cfg, grid=grid)
    table = sweep(grid, cfg.setup, cfg.affinity, cfg.master_seed, jobs=args.jobs)
    table.write(args.out, {"config": cfg.to_dict()})
    sio.write_manifest(Path(args.out).parent / MANIFEST, cfg.to_dict(), cfg.master_seed,
                       [args.out, str(args.out) + ".meta.json"])
    log.info("wrote %d rows to %s", len(table), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sonarblob", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("simulate", help="write seeded scenario ping files and ground truth")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--targets", type=int, default=1, help="scenarios with a target")
    p.add_argument("--clutter", type=int, default=0, help="clutter-only scenarios")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--scr-db", type=float)
    p.add_argument("--valid-fraction", type=float)
    p.add_argument("--n-pings", type=int)
    p.add_argument("--format", choices=("f32", "wav"), default="f32")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("detect", help="run the detection chain on ping files")
    common(p)
    p.add_argument("input", help="block directory of ping_NNN files, or a directory of blocks")
    p.add_argument("--out", required=True)
    p.add_argument("--sample-rate", type=float, help="sample rate of raw input")
    p.add_argument("--dump-weights", action="store_true", help="also write the weight matrix")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="score detections against ground truth")
    common(p)
    p.add_argument("detections")
    p.add_argument("--truth", required=True, help="directory holding truth.json sidecars")
    p.add_argument("--out", required=True, help="metrics CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="simulate, detect and score a parameter grid")
    common(p)
    p.add_argument("--out", required=True, help="metrics CSV")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--targets", type=int, help="target scenarios per cell")
    p.add_argument("--clutter", type=int, help="clutter-only scenarios")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(message)s")
    logging.captureWarnings(True)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_PARAM
    try:
        return args.func(args)
    except sio.ArtifactError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
