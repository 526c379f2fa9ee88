"""Command-line entry point.

One binary with verb subcommands covering the toolkit: coefficient sampling,
image distortion and undistortion, grid generation, dataset generation and
splitting, and error-map evaluation and reporting.

Exit codes: 0 on success, 2 for usage, configuration, I/O or format errors,
3 for numeric failures (displacement budget, inverse-distortion convergence).
Machine-readable output goes to stdout only when --out / --out-dir is absent;
diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .camera import ImageGeometry
from .dataset import DatasetManifest, generate_dataset, split_dataset
from .errormap import (
    DEFAULT_EVAL_GEOMETRY,
    CameraParameterVector,
    ErrorMap,
    error_map_to_heat_png,
    extract_line_profiles,
    pixel_error_map,
    read_predictions,
    render_summary_table,
    summarize,
    summary_from_csv,
    summary_to_csv,
)
from .errors import BudgetExhausted, CamdistError, ConfigError, NonConvergence, \
    PredictionsFormatError
from .raster import read_image, write_image
from .sampler import load_config, rng_for_index, sample_camera
from .warp import apply_distortion_to_image, generate_grid_image, undistort_image

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _parse_geometry(spec: str) -> ImageGeometry:
    try:
        w, h = spec.lower().split("x")
        return ImageGeometry(int(w), int(h))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad geometry {spec!r}; expected WIDTHxHEIGHT") from exc


def _default_threads(value: int | None) -> int:
    if value is not None:
        return max(1, value)
    env = os.environ.get("THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"bad THREADS environment value {env!r}")
    return 1


def _load_params_file(path) -> tuple[CameraParameterVector, float]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    params = CameraParameterVector.from_mapping(data)
    focal_scale = float(data.get("focal_scale", 1.0))
    return params, focal_scale


def _emit(text: str, out_path) -> None:
    if out_path is None:
        sys.stdout.write(text)
    else:
        Path(out_path).write_text(text, encoding="utf-8")


def _cmd_sample_params(args) -> int:
    geometry = _parse_geometry(args.geometry)
    cfg = load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed)
    lines = []
    for i in range(args.count):
        cam = sample_camera(geometry, cfg, rng_for_index(cfg.seed, i))
        rec = {
            "id": f"{i:06d}",
            "width_px": geometry.width_px,
            "height_px": geometry.height_px,
            "hfov_deg": cam.hfov_deg,
            "cx": cam.intrinsics.cx,
            "cy": cam.intrinsics.cy,
            "k1": cam.coefficients.k1,
            "k2": cam.coefficients.k2,
            "k3": cam.coefficients.k3,
            "p1": cam.coefficients.p1,
            "p2": cam.coefficients.p2,
            "focal_scale": cam.focal_scale,
            "draw_order": list(cam.draw_order),
        }
        lines.append(json.dumps(rec))
    _emit("".join(line + "\n" for line in lines), args.out)
    return EXIT_OK


def _cmd_warp(args, *, inverse: bool) -> int:
    src = read_image(args.infile)
    params, focal_scale = _load_params_file(args.params)
    intr = params.intrinsics(src.geometry)
    if inverse:
        out = undistort_image(src, intr, params.coefficients())
    else:
        out = apply_distortion_to_image(src, intr, params.coefficients(), focal_scale)
    write_image(out, args.out)
    return EXIT_OK


def _cmd_gen_grid(args) -> int:
    geometry = _parse_geometry(args.geometry)
    img = generate_grid_image(geometry, args.spacing, args.line_width)
    write_image(img, args.out)
    return EXIT_OK


def _cmd_gen_dataset(args) -> int:
    geometry = _parse_geometry(args.geometry)
    cfg = load_config(args.config)
    threads = _default_threads(args.threads)
    generate_dataset(args.source_dir, geometry, args.count, cfg, args.out_dir,
                     threads=threads)
    return EXIT_OK


def _cmd_split(args) -> int:
    manifest = DatasetManifest.load(args.manifest)
    train, val, test = split_dataset(manifest, args.seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in (("train", train), ("val", val), ("test", test)):
        part.save(out_dir / f"{name}_manifest.json")
    return EXIT_OK


def _cmd_eval(args) -> int:
    geometry = _parse_geometry(args.geometry)
    records = read_predictions(args.predictions)
    if not records:
        raise PredictionsFormatError("predictions file holds no records",
                                     line_number=1)
    if args.subset is not None and args.subset < len(records):
        rng = np.random.default_rng(args.subset_seed)
        keep = sorted(int(i) for i in
                      rng.choice(len(records), size=args.subset, replace=False))
        records = [records[i] for i in keep]
    threads = _default_threads(args.threads)

    def one(rec):
        return pixel_error_map(rec.true, rec.pred, geometry)

    acc = np.zeros((geometry.height_px, geometry.width_px))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for emap in pool.map(one, records):
                acc += emap.values
    else:
        for rec in records:
            acc += one(rec).values
    mean_map = ErrorMap(acc / len(records))
    rows = summarize(extract_line_profiles(mean_map))
    csv_text = summary_to_csv(rows)
    if args.out_dir is None:
        sys.stdout.write(csv_text)
    else:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_image(error_map_to_heat_png(mean_map), out_dir / "mean_error_map.png")
        mean_map.values.astype("<f8").tofile(out_dir / "mean_error_map.bin")
        (out_dir / "summary.csv").write_text(csv_text, encoding="utf-8")
    return EXIT_OK


def _cmd_report(args) -> int:
    text = Path(args.summary).read_text(encoding="utf-8")
    rows = summary_from_csv(text)
    _emit(render_summary_table(rows), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camdist",
        description="Brown-Conrady camera distortion toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-params", help="draw distortion parameter sets")
    p.add_argument("--geometry", required=True, metavar="WxH")
    p.add_argument("--config", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.set_defaults(func=_cmd_sample_params)

    for name, inverse in (("distort", False), ("undistort", True)):
        p = sub.add_parser(name, help=f"{name} an image with given parameters")
        p.add_argument("--in", dest="infile", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--params", required=True,
                       help="JSON file with hfov_deg, cx, cy, k1..k3, p1, p2")
        p.set_defaults(func=lambda a, inv=inverse: _cmd_warp(a, inverse=inv))

    p = sub.add_parser("gen-grid", help="generate a line grid test image")
    p.add_argument("--geometry", required=True, metavar="WxH")
    p.add_argument("--spacing", type=int, required=True)
    p.add_argument("--line-width", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_grid)

    p = sub.add_parser("gen-dataset", help="generate a synthetic dataset")
    p.add_argument("--source-dir", required=True)
    p.add_argument("--geometry", required=True, metavar="WxH")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=_cmd_gen_dataset)

    p = sub.add_parser("split", help="split a dataset 70/15/15")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("eval", help="mean error map and summary for predictions")
    p.add_argument("--predictions", required=True)
    p.add_argument("--geometry", metavar="WxH",
                   default=str(DEFAULT_EVAL_GEOMETRY))
    p.add_argument("--subset", type=int,
                   help="evaluate a seeded random subset of the records")
    p.add_argument("--subset-seed", type=int, default=0)
    p.add_argument("--out-dir")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("report", help="render a summary CSV as a min/max table")
    p.add_argument("--summary", required=True)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BudgetExhausted, NonConvergence) as exc:
        print(f"camdist: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, PredictionsFormatError, CamdistError) as exc:
        print(f"camdist: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"camdist: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
