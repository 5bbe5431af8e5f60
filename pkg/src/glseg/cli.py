"""Command line entry point: ``glseg segment|partition|eval|bench``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import gridio, regions as regmod
from .config import PipelineConfig, load_config
from .errors import ContractError, GlsegError, ImageIOError, IngestionError, SolverError
from .evaluation import METRICS, aggregate, evaluate
from .imgproc import load_image
from .multiclass import threshold_ucm2
from .pipeline import PHASES, PhaseError, run_partition, run_pipeline
from .spectral import normalize_eigenvector

log = logging.getLogger("glseg")

EXIT_OK, EXIT_INPUT, EXIT_EVAL, EXIT_SOLVER = 0, 2, 3, 4
IMAGE_SUFFIXES = (".png", ".ppm")
DEFAULT_SCALES = tuple(np.round(np.linspace(0.0, 1.0, 17), 6))


class EvalError(GlsegError):
    pass


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "target_n", None) is not None:
        changes["target_n"] = args.target_n
    return cfg.replace(**changes) if changes else cfg


def _external(args):
    if bool(args.superpixels) != bool(args.edges):
        raise ContractError("--superpixels and --edges must be given together")
    if args.superpixels:
        return regmod.ingest_external(args.superpixels, args.edges)
    return None, None


def _write_partition(res, stem: str, out: Path) -> dict:
    paths = {}
    p = out / f"{stem}.regions.png"
    gridio.write_label_png(p, res.regions.labels)
    paths["regions"] = str(p)
    p = out / f"{stem}.eigvecs.csv"
    gridio.write_csv(p, res.basis.vectors, fmt="%.12g")
    paths["eigenvectors"] = str(p)
    for k in range(res.basis.d):
        p = out / f"{stem}.eig{k + 1}.png"
        gridio.write_scalar_png(p, normalize_eigenvector(res.basis.vectors[:, k])[res.regions.labels])
        paths[f"eig{k + 1}"] = str(p)
    return paths


def _manifest(args, cfg, res, wall, outputs, image_path) -> dict:
    timings = {name: res.timings.get(name, 0.0) for name in PHASES if name in res.timings}
    return {
        "inputs": {"image": str(image_path),
                   "superpixels": getattr(args, "superpixels", None),
                   "edges": getattr(args, "edges", None)},
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "timings": timings,
        "total_seconds": wall,
        "n_regions": res.regions.n,
        "checks": res.checks,
        "outputs": outputs,
    }


def _run_one(image_path, args, partition_only=False):
    cfg = _config(args)
    img = load_image(image_path)
    regions, edges = _external(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(image_path).stem
    t0 = time.perf_counter()
    if partition_only:
        res = run_partition(img, cfg, regions, edges)
    else:
        res = run_pipeline(img, cfg, regions, edges)
    wall = time.perf_counter() - t0
    outputs = _write_partition(res, stem, out)
    if not partition_only:
        h = res.hierarchy
        p = out / f"{stem}.png"
        gridio.write_label_png(p, h.segmentation(args.threshold))
        outputs["labels"] = str(p)
        p = out / f"{stem}.ucm2.csv"
        gridio.write_csv(p, h.ucm2(), fmt="%.6g")
        outputs["ucm2"] = str(p)
        p = out / f"{stem}.soft.png"
        gridio.write_scalar_png(p, h.soft_map())
        outputs["soft_png"] = str(p)
    manifest = _manifest(args, cfg, res, wall, outputs, image_path)
    p = out / f"{stem}.manifest.json"
    p.write_text(json.dumps(manifest, indent=2))
    return manifest


def cmd_segment(args) -> int:
    manifest = _run_one(args.image, args)
    _print_timings(manifest)
    return EXIT_OK


def cmd_partition(args) -> int:
    manifest = _run_one(args.image, args, partition_only=True)
    _print_timings(manifest)
    return EXIT_OK


def _print_timings(manifest):
    for name, sec in manifest["timings"].items():
        print(f"{name:<34s} {sec:8.3f} s")
    print(f"{'Total':<34s} {manifest['total_seconds']:8.3f} s")


def _label_files(directory: Path) -> dict:
    found = {}
    for p in sorted(directory.iterdir()):
        if p.is_dir():
            files = sorted(q for q in p.iterdir() if q.suffix.lower() in (".png", ".csv"))
            if files:
                found[p.name] = files
        elif p.suffix.lower() in (".png", ".csv") and not p.name.endswith(".ucm2.csv"):
            found.setdefault(p.stem, [p])
    return found


def _seg_sources(directory: Path) -> dict:
    out = {}
    for p in sorted(directory.iterdir()):
        if p.name.endswith(".ucm2.csv"):
            out[p.name[: -len(".ucm2.csv")]] = ("ucm2", p)
    for p in sorted(directory.iterdir()):
        if p.is_file() and p.suffix.lower() in (".png", ".csv") and not p.name.endswith(".ucm2.csv"):
            out.setdefault(p.stem, ("labels", p))
    return out


def run_eval(seg_dir, gt_dir, scales=DEFAULT_SCALES):
    seg_dir, gt_dir = Path(seg_dir), Path(gt_dir)
    for d in (seg_dir, gt_dir):
        if not d.is_dir():
            raise EvalError(f"{d}: not a directory")
    gts = _label_files(gt_dir)
    if not gts:
        raise EvalError(f"{gt_dir}: no ground-truth label maps")
    segs = _seg_sources(seg_dir)
    missing = sorted(s for s in gts if s not in segs)
    if missing:
        raise EvalError("no segmentation for: " + ", ".join(missing))
    scales = np.asarray(scales, dtype=float)
    table = {m: np.zeros((len(gts), len(scales))) for m in METRICS}
    names = sorted(gts)
    for i, stem in enumerate(names):
        gt_maps = [gridio.read_label_grid(p) for p in gts[stem]]
        kind, path = segs[stem]
        if kind == "ucm2":
            ucm = gridio.read_scalar_grid(path)
            segs_at = [threshold_ucm2(ucm, t) for t in scales]
        else:
            fixed = gridio.read_label_grid(path)
            segs_at = [fixed] * len(scales)
        for s, seg in enumerate(segs_at):
            try:
                vals = evaluate(seg, gt_maps)
            except ContractError as exc:
                raise EvalError(f"{stem}: {exc}") from None
            for m in METRICS:
                table[m][i, s] = vals[m]
    return aggregate(table, scales, names)


def cmd_eval(args) -> int:
    scales = DEFAULT_SCALES if args.scales is None else \
        [float(s) for s in args.scales.replace(",", " ").split()]
    report = run_eval(args.seg_dir, args.gt_dir, scales)
    if args.out:
        Path(args.out).write_text(report.to_csv())
    print(report.summary(), end="")
    return EXIT_OK


def _bench_one(path, cfg_path, seed):
    cfg = load_config(cfg_path) if cfg_path else PipelineConfig()
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    img = load_image(path)
    t0 = time.perf_counter()
    res = run_pipeline(img, cfg)
    total = time.perf_counter() - t0
    return [res.timings[p] for p in PHASES] + [total]


def timing_table(rows) -> str:
    """Min/Max/Mean/Var per phase, one row per phase plus the total."""
    arr = np.asarray(rows, dtype=float).reshape(-1, len(PHASES) + 1)
    labels = [f"{i + 1}: {p}" for i, p in enumerate(PHASES)] + ["Total"]
    width = max(len(s) for s in labels)
    lines = [f"{'Phase':<{width}} | {'Min':>7} | {'Max':>7} | {'Mean':>7} | {'Var.':>7}"]
    lines.append("-" * len(lines[0]))
    for k, name in enumerate(labels):
        col = arr[:, k]
        lines.append(f"{name:<{width}} | {col.min():7.2f} | {col.max():7.2f} | "
                     f"{col.mean():7.2f} | {col.var():7.2f}")
    return "\n".join(lines) + "\n"


def cmd_bench(args) -> int:
    directory = Path(args.image_dir)
    if not directory.is_dir():
        raise ImageIOError(directory, "not a directory")
    images = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not images:
        raise ImageIOError(directory, "no PNG or PPM images found")
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(_bench_one, images, [args.config] * len(images),
                                 [args.seed] * len(images)))
    else:
        rows = [_bench_one(p, args.config, args.seed) for p in images]
    print(f"{len(images)} image(s)")
    print(timing_table(rows), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glseg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def pipeline_args(p):
        p.add_argument("image")
        p.add_argument("--config")
        p.add_argument("--out", default=".")
        p.add_argument("--seed", type=int)
        p.add_argument("--superpixels", help="external superpixel label map")
        p.add_argument("--edges", help="external edge map")
        p.add_argument("--target-n", type=int, dest="target_n")
        p.add_argument("--threads", type=int, default=1,
                       help="accepted for symmetry with bench; one image runs sequentially")

    p = sub.add_parser("segment", help="full pipeline")
    pipeline_args(p)
    p.add_argument("--threshold", type=float, default=0.5,
                   help="boundary threshold for the written label map")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("partition", help="stop after the eigenvector partitions")
    pipeline_args(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("eval", help="Covering / PRI / VoI with ODS and OIS")
    p.add_argument("seg_dir")
    p.add_argument("gt_dir")
    p.add_argument("--scales", help="comma separated thresholds")
    p.add_argument("--out", help="write the per-image CSV here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="per-phase timing over a directory of images")
    p.add_argument("image_dir")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except EvalError as exc:
        print(f"glseg: evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVAL
    except PhaseError as exc:
        print(f"glseg: {exc}", file=sys.stderr)
        return EXIT_SOLVER if isinstance(exc.cause, SolverError) else EXIT_INPUT
    except SolverError as exc:
        print(f"glseg: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ImageIOError, IngestionError, ContractError) as exc:
        print(f"glseg: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"glseg: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
