"""Command-line front end.

Subcommands: generate, encode, decode, eval-stixel, eval-freespace, synth.
A flat key=value config file (see README) supplies defaults; command-line
flags override it. When --config is absent the STIXELFORGE_CONFIG environment
variable is consulted. Exit codes: 0 success, 1 partial (some frames were
skipped), 2 usage/config/IO errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as stx_io
from .agt import AgtConfig, generate_stixel_world
from .cluster import DbscanConfig
from .codec import DecodeConfig, decode_heatmaps, encode_targets, heatmaps_from_targets
from .core import Calibration, GridSpec
from .errors import GroundNotFoundError, StixelForgeError
from .ground import RansacConfig
from .loss import LossWeights
from .metrics import (
    MatchReport,
    best_operating_point,
    bottom_contact_per_column,
    freespace_score,
    match_worlds,
    pr_sweep,
    summarize_freespace,
)
from .synth import default_calibration, oracle_stixel_world, parse_scene, simulate_lidar
from .textconf import get_scalar, parse_kv

log = logging.getLogger("stixelforge")

ENV_CONFIG = "STIXELFORGE_CONFIG"


@dataclass
class RunConfig:
    """Validated run parameters assembled from the config file plus flags."""

    seed: int = 0
    stride: int = 8
    image_width: int = 1920
    image_height: int = 1200
    agt: AgtConfig = field(default_factory=AgtConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)
    weights: LossWeights = field(default_factory=LossWeights)

    @staticmethod
    def load(path: Path | None) -> "RunConfig":
        if path is None:
            return RunConfig()
        kv = parse_kv(path.read_text())
        seed = get_scalar(kv, "seed", int, default=0)
        stride = get_scalar(kv, "grid.stride", int, default=8)
        ransac = RansacConfig(
            iterations=get_scalar(kv, "ransac.iterations", int, default=500),
            inlier_threshold=get_scalar(kv, "ransac.inlier_threshold", float, default=0.15),
            stage2_threshold=get_scalar(kv, "ransac.stage2_threshold", float, default=0.08),
            height_prior=get_scalar(kv, "ransac.height_prior", float, default=-0.5),
            min_inlier_fraction=get_scalar(kv, "ransac.min_inlier_fraction", float, default=0.05),
            seed=seed,
        )
        dbscan = DbscanConfig(
            eps=get_scalar(kv, "dbscan.eps", float, default=0.4),
            min_pts=get_scalar(kv, "dbscan.min_pts", int, default=3),
        )
        agt = AgtConfig(
            ransac=ransac,
            dbscan=dbscan,
            hpr_gamma=get_scalar(kv, "hpr.gamma", float, default=1.0),
            ground_attach_delta=get_scalar(kv, "agt.ground_attach_delta", float, default=0.3),
            min_stixel_height=get_scalar(kv, "agt.min_stixel_height", int, default=4),
            stride=stride,
        )
        decode = DecodeConfig(
            t_occ=get_scalar(kv, "decode.t_occ", float, default=0.5),
            t_cut=get_scalar(kv, "decode.t_cut", float, default=0.5),
            min_run_cells=get_scalar(kv, "decode.min_run_cells", int, default=1),
        )
        weights = LossWeights(
            alpha=get_scalar(kv, "loss.alpha", float, default=1.0),
            beta=get_scalar(kv, "loss.beta", float, default=0.1),
            gamma=get_scalar(kv, "loss.gamma", float, default=1.0),
        )
        return RunConfig(
            seed=seed,
            stride=stride,
            image_width=get_scalar(kv, "image.width", int, default=1920),
            image_height=get_scalar(kv, "image.height", int, default=1200),
            agt=agt,
            decode=decode,
            weights=weights,
        )

    def with_seed(self, seed: int) -> "RunConfig":
        ransac = dataclasses.replace(self.agt.ransac, seed=seed)
        return dataclasses.replace(
            self, seed=seed, agt=dataclasses.replace(self.agt, ransac=ransac)
        )


def _atomic_write(path: Path, data: bytes | str) -> None:
    mode = "wb" if isinstance(data, bytes) else "w"
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _config_path(args) -> Path | None:
    if args.config is not None:
        return Path(args.config)
    env = os.environ.get(ENV_CONFIG)
    return Path(env) if env else None


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(_config_path(args))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _stem(path: Path) -> str:
    name = path.name
    for suffix in (".stx.csv", ".sxhm", ".bin", ".txt", ".ppm"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return path.stem


def _collect(directory: Path, suffix: str) -> dict[str, Path]:
    if not directory.is_dir():
        raise StixelForgeError(f"not a directory: {directory}")
    return {_stem(p): p for p in sorted(directory.glob(f"*{suffix}"))}


def _paired_stems(a: dict[str, Path], b: dict[str, Path], what: str) -> list[str]:
    if set(a) != set(b):
        missing = sorted(set(a) ^ set(b))
        raise StixelForgeError(f"{what} frame sets differ, e.g. {missing[:5]}")
    if not a:
        raise StixelForgeError(f"no {what} frames found")
    return sorted(a)


# ---------------------------------------------------------------- generate

def cmd_generate(args) -> int:
    cfg = _load_config(args)
    calib_text = Path(args.calib).read_text()
    calib = stx_io.read_kitti_calib(calib_text, image_size=(cfg.image_width, cfg.image_height))
    out_dir = Path(args.out)
    clouds = [Path(p) for p in args.clouds]

    def run_frame(cloud_path: Path):
        pc = stx_io.read_kitti_velodyne(cloud_path.read_bytes())
        world = generate_stixel_world(pc, calib, cfg.agt)
        return world

    failures = 0
    results: dict[str, object] = {}
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        futures = {pool.submit(run_frame, p): p for p in clouds}
        for future, path in futures.items():
            stem = _stem(path)
            try:
                results[stem] = future.result()
            except GroundNotFoundError as exc:
                log.warning("frame %s skipped: %s", stem, exc)
                failures += 1
    for stem in sorted(results):
        world = results[stem]
        _atomic_write(out_dir / f"{stem}.stx.csv", stx_io.write_stixel_csv(world, frame_id=stem))
        if args.overlay:
            ppm = stx_io.render_overlay_ppm(world, (world.image_width, world.image_height))
            _atomic_write(out_dir / f"{stem}.ppm", ppm)
    print(f"generated {len(results)} frame(s), skipped {failures}")
    return 1 if failures else 0


# ----------------------------------------------------------- encode/decode

def cmd_encode(args) -> int:
    cfg = _load_config(args)
    out_dir = Path(args.out)
    for path in (Path(p) for p in args.inputs):
        world = stx_io.read_stixel_csv(path.read_text())
        grid = GridSpec.for_image(world.image_width, world.image_height, world.stixel_width)
        hm = heatmaps_from_targets(encode_targets(world, grid))
        _atomic_write(out_dir / f"{_stem(path)}.sxhm", stx_io.write_heatmap_blob(hm))
    print(f"encoded {len(args.inputs)} frame(s)")
    return 0


def cmd_decode(args) -> int:
    cfg = _load_config(args)
    decode_cfg = DecodeConfig(
        t_occ=args.t_occ if args.t_occ is not None else cfg.decode.t_occ,
        t_cut=args.t_cut if args.t_cut is not None else cfg.decode.t_cut,
        min_run_cells=cfg.decode.min_run_cells,
    )
    out_dir = Path(args.out)
    for path in (Path(p) for p in args.inputs):
        hm = stx_io.read_heatmap_blob(path.read_bytes())
        world = decode_heatmaps(
            hm, decode_cfg, hm.grid.image_width, hm.grid.image_height
        )
        _atomic_write(
            out_dir / f"{_stem(path)}.stx.csv", stx_io.write_stixel_csv(world, frame_id=_stem(path))
        )
    print(f"decoded {len(args.inputs)} frame(s)")
    return 0


# ------------------------------------------------------------- eval-stixel

def _parse_sweep(text: str) -> list[float]:
    try:
        t0, t1, steps = text.split(":")
        return [float(t) for t in np.linspace(float(t0), float(t1), int(steps))]
    except ValueError as exc:
        raise StixelForgeError(f"bad --sweep spec {text!r}, expected t0:t1:steps") from exc


def cmd_eval_stixel(args) -> int:
    cfg = _load_config(args)
    gt_files = _collect(Path(args.gt), ".stx.csv")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.heatmaps is not None:
        hm_files = _collect(Path(args.heatmaps), ".sxhm")
        stems = _paired_stems(gt_files, hm_files, "gt/heatmap")
        gt_worlds = [stx_io.read_stixel_csv(gt_files[s].read_text()) for s in stems]
        heatmaps = [stx_io.read_heatmap_blob(hm_files[s].read_bytes()) for s in stems]
        thresholds = _parse_sweep(args.sweep) if args.sweep else [cfg.decode.t_occ]
        points = pr_sweep(gt_worlds, heatmaps, thresholds, cfg.decode, iou_min=args.iou)
        best = best_operating_point(points)
        rows = ["t,precision_micro,recall_micro,f1_micro,precision_macro,recall_macro,f1_macro"]
        for p in points:
            rows.append(
                f"{p.threshold:.6g},{p.precision:.6f},{p.recall:.6f},{p.f1:.6f},"
                f"{p.precision_macro:.6f},{p.recall_macro:.6f},{p.f1_macro:.6f}"
            )
        rows.append(f"# best f1={best.f1:.6f} at t={best.threshold:.6g}")
        _atomic_write(out_dir / "sweep.csv", "\n".join(rows) + "\n")
        if not args.no_figures:
            from .report import save_f1_curve, save_pr_curve

            save_pr_curve(points, out_dir / "pr_curve.png")
            save_f1_curve(points, out_dir / "f1_curve.png")
        print(f"best f1={best.f1:.4f} at t={best.threshold:.4g} "
              f"(precision={best.precision:.4f}, recall={best.recall:.4f})")
        return 0

    if args.pred is None:
        raise StixelForgeError("eval-stixel needs --pred or --heatmaps")
    pred_files = _collect(Path(args.pred), ".stx.csv")
    stems = _paired_stems(gt_files, pred_files, "gt/pred")
    reports: list[MatchReport] = []
    for s in stems:
        gt = stx_io.read_stixel_csv(gt_files[s].read_text())
        pred = stx_io.read_stixel_csv(pred_files[s].read_text())
        reports.append(match_worlds(gt, pred, iou_min=args.iou))
    tp = sum(r.true_positives for r in reports)
    fp = sum(r.false_positives for r in reports)
    fn = sum(r.false_negatives for r in reports)
    micro = MatchReport.from_counts(tp, fp, fn)
    n = len(reports)
    rows = [
        "precision_micro,recall_micro,f1_micro,precision_macro,recall_macro,f1_macro,tp,fp,fn",
        f"{micro.precision:.6f},{micro.recall:.6f},{micro.f1:.6f},"
        f"{sum(r.precision for r in reports)/n:.6f},{sum(r.recall for r in reports)/n:.6f},"
        f"{sum(r.f1 for r in reports)/n:.6f},{tp},{fp},{fn}",
    ]
    _atomic_write(out_dir / "eval.csv", "\n".join(rows) + "\n")
    print(f"precision={micro.precision:.4f} recall={micro.recall:.4f} f1={micro.f1:.4f} "
          f"(tp={tp} fp={fp} fn={fn})")
    return 0


# ---------------------------------------------------------- eval-freespace

def cmd_eval_freespace(args) -> int:
    gt_files = _collect(Path(args.gt), ".stx.csv")
    pred_files = _collect(Path(args.pred), ".stx.csv")
    stems = _paired_stems(gt_files, pred_files, "gt/pred")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = []
    for s in stems:
        gt = stx_io.read_stixel_csv(gt_files[s].read_text())
        pred = stx_io.read_stixel_csv(pred_files[s].read_text())
        report = freespace_score(
            bottom_contact_per_column(gt),
            bottom_contact_per_column(pred),
            gt.image_height,
        )
        reports.append(report)
    score, sigma = summarize_freespace(reports)
    rows = ["frame,score,sigma"]
    for s, r in zip(stems, reports):
        rows.append(f"{s},{r.score:.6f},{r.sigma:.6f}")
    rows.append(f"# aggregate score={score:.6f} sigma={sigma:.6f}")
    _atomic_write(out_dir / "freespace.csv", "\n".join(rows) + "\n")
    if args.per_column:
        dump = ["frame,column,score"]
        for s, r in zip(stems, reports):
            for i, v in enumerate(r.per_column):
                dump.append(f"{s},{i},{v:.6f}")
        _atomic_write(out_dir / "freespace_columns.csv", "\n".join(dump) + "\n")
    if not args.no_figures:
        from .report import save_freespace_figure

        save_freespace_figure(reports, stems, out_dir / "freespace.png")
    print(f"freespace score={score:.3f}% sigma={sigma:.3f}%")
    return 0


# -------------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    cfg = _load_config(args)
    spec = parse_scene(Path(args.scene).read_text())
    if getattr(args, "seed", None) is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    out_dir = Path(args.out)
    stem = _stem(Path(args.scene))
    calib = default_calibration(width=cfg.image_width, height=cfg.image_height)
    grid = GridSpec.for_image(cfg.image_width, cfg.image_height, cfg.stride)
    cloud = simulate_lidar(spec)
    oracle = oracle_stixel_world(
        spec, calib, grid,
        ground_attach_delta=cfg.agt.ground_attach_delta,
        min_stixel_height=cfg.agt.min_stixel_height,
    )
    _atomic_write(out_dir / f"{stem}.bin", stx_io.write_kitti_velodyne(cloud))
    _atomic_write(out_dir / "calib.txt", stx_io.write_kitti_calib(calib))
    _atomic_write(out_dir / f"{stem}.stx.csv", stx_io.write_stixel_csv(oracle, frame_id=stem))
    print(f"simulated {len(cloud)} points, {len(oracle.stixels)} oracle stixels")
    return 0


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stixelforge",
        description="Multi-layer stixel ground truth, codecs, and evaluation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help=f"config file (fallback: ${ENV_CONFIG})")
        p.add_argument("--seed", type=int, help="override the config seed")

    p = sub.add_parser("generate", help="point clouds + calibration -> stixel CSV")
    common(p)
    p.add_argument("clouds", nargs="+", help="velodyne .bin files")
    p.add_argument("--calib", required=True, help="KITTI-style calibration .txt")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--overlay", action="store_true", help="also write PPM overlays")
    p.add_argument("--jobs", type=int, default=1, help="parallel frame workers")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("encode", help="stixel CSV -> heat-map blob")
    common(p)
    p.add_argument("inputs", nargs="+", help=".stx.csv files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="heat-map blob -> stixel CSV")
    common(p)
    p.add_argument("inputs", nargs="+", help=".sxhm files")
    p.add_argument("--out", required=True)
    p.add_argument("--t-occ", type=float, default=None, help="occupancy threshold (default 0.5)")
    p.add_argument("--t-cut", type=float, default=None, help="cut threshold (default 0.5)")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval-stixel", help="IoU matching report / threshold sweep")
    common(p)
    p.add_argument("--gt", required=True, help="ground-truth .stx.csv directory")
    p.add_argument("--pred", help="prediction .stx.csv directory")
    p.add_argument("--heatmaps", help="prediction .sxhm directory (for --sweep)")
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--sweep", help="threshold sweep t0:t1:steps")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval_stixel)

    p = sub.add_parser("eval-freespace", help="per-column free-space score")
    common(p)
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--per-column", action="store_true", help="dump per-column scores")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval_freespace)

    p = sub.add_parser("synth", help="scene spec -> cloud + calib + oracle CSV")
    common(p)
    p.add_argument("scene", help="scene spec file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except StixelForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
