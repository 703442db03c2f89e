"""Command line interface.

Subcommands: enhance, ofield, rfmap, curvature, synth, eval, batch.
Exit codes: 0 success, 1 processing errors occurred, 2 invalid
configuration or usage.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as cgio
from .backend import backend_name
from .gabor import GABOR_PRESETS, WindowShape
from .pipeline import PipelineConfig, StageError, apply_preset, batch, enhance
from .synthetic import clean_pattern, evaluate, gen_concentric, gen_parallel


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="PATH", help="JSON pipeline configuration")
    p.add_argument("--preset", metavar="NAME",
                   help=f"named filter preset ({', '.join(sorted(GABOR_PRESETS))})")
    p.add_argument("--rf-method", choices=("curved", "xsig"),
                   help="ridge frequency estimator")
    p.add_argument("--filter", dest="filter_method", choices=("curved", "straight"),
                   help="contextual filter variant")
    p.add_argument("--window", choices=("full", "ellipse"), help="filter window shape")
    p.add_argument("--sigma-x", type=float, metavar="F")
    p.add_argument("--sigma-y", type=float, metavar="F")
    p.add_argument("--region", metavar="PxQ", type=_parse_region,
                   help="region size as <rows>x<cols>, both odd (e.g. 33x65)")


def _parse_region(text: str) -> tuple[int, int]:
    try:
        rows, cols = (int(t) for t in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad region size {text!r}; expected e.g. 33x65")
    if rows < 3 or cols < 3 or rows % 2 == 0 or cols % 2 == 0:
        raise argparse.ArgumentTypeError("region sizes must be odd and >= 3")
    return (rows - 1) // 2, (cols - 1) // 2


def _build_config(args) -> PipelineConfig:
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.preset:
        config = apply_preset(config, args.preset)
    if args.rf_method:
        config = replace(config, rf=replace(config.rf, method=args.rf_method))
    if args.filter_method:
        config = replace(config, filter_method=args.filter_method)
    gabor = config.gabor
    if args.window:
        gabor = replace(gabor, window=WindowShape(args.window))
    if args.sigma_x is not None:
        gabor = replace(gabor, sigma_x=args.sigma_x)
    if args.sigma_y is not None:
        gabor = replace(gabor, sigma_y=args.sigma_y)
    region = config.region
    if args.region:
        p, q = args.region
        gabor = replace(gabor, p=p, q=q)
        region = replace(region, p=p, q=q)
    return replace(config, gabor=gabor, region=region)


def _emit_list(text: str | None) -> tuple[str, ...]:
    if not text:
        return ()
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _run_pipeline(args, path):
    img = cgio.load_image(path)
    return img, enhance(img, _build_config(args))


def _cmd_enhance(args) -> int:
    img, result = _run_pipeline(args, args.input)
    out = Path(args.output)
    cgio.save_image(result.enhanced, out, background=255.0)
    stem = out.with_suffix("")
    emit = _emit_list(args.emit)
    if "of" in emit:
        cgio.write_orientation_text(result.of, f"{stem}.of.txt")
    if "rf" in emit:
        cgio.write_rf_text(result.rf, f"{stem}.rf.txt")
    if "curvature" in emit:
        cgio.write_curvature_text(result.curvature, f"{stem}.curv.txt")
        cgio.write_curvature_overlay_png(img, result.curvature, f"{stem}.curv.png")
    return 0


def _cmd_ofield(args) -> int:
    _, result = _run_pipeline(args, args.input)
    cgio.write_orientation_text(result.of, args.output)
    if args.quiver:
        cgio.write_orientation_quiver_png(result.of, args.quiver)
    return 0


def _cmd_rfmap(args) -> int:
    _, result = _run_pipeline(args, args.input)
    cgio.write_rf_text(result.rf, args.output)
    if args.png:
        cgio.write_rf_falsecolor_png(result.rf, args.png)
    return 0


def _cmd_curvature(args) -> int:
    img, result = _run_pipeline(args, args.input)
    cgio.write_curvature_png(result.curvature, args.output)
    if args.text:
        cgio.write_curvature_text(result.curvature, args.text)
    if args.overlay:
        cgio.write_curvature_overlay_png(img, result.curvature, args.overlay)
    return 0


def _cmd_synth(args) -> int:
    if args.kind == "parallel":
        pattern = gen_parallel(args.width, args.height, args.period,
                               math.radians(args.angle), args.contrast,
                               args.noise_sigma, args.seed)
    else:
        cx, cy = ((args.width - 1) / 2.0, (args.height - 1) / 2.0)
        if args.center:
            cx, cy = (float(t) for t in args.center.split(","))
        pattern = gen_concentric(args.width, args.height, args.period,
                                 (cx, cy), args.inner_radius, args.contrast,
                                 args.noise_sigma, args.seed)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    cgio.write_pgm(pattern.image, f"{prefix}.pgm")
    clean = clean_pattern(pattern.descriptor)
    cgio.write_pgm(clean.image, f"{prefix}.clean.pgm")
    cgio.write_mask_pgm(pattern.image.mask, f"{prefix}.mask.pgm")
    cgio.write_orientation_text(pattern.true_of, f"{prefix}.of.txt")
    cgio.write_rf_text(pattern.true_rf, f"{prefix}.rf.txt")
    cgio.write_curvature_text(pattern.true_curvature, f"{prefix}.curv.txt")
    desc = pattern.descriptor
    meta = {
        "kind": desc.kind.value, "width": desc.width, "height": desc.height,
        "period": desc.period, "angle": desc.angle, "center": desc.center,
        "inner_radius": desc.inner_radius, "contrast": desc.contrast,
        "noise_sigma": desc.noise_sigma, "seed": desc.seed,
    }
    Path(f"{prefix}.json").write_text(json.dumps(meta, indent=2) + "\n")
    return 0


def _load_pattern(prefix: str):
    from .synthetic import PatternDescriptor, PatternKind, SyntheticPattern

    meta = json.loads(Path(f"{prefix}.json").read_text())
    desc = PatternDescriptor(
        PatternKind(meta["kind"]), meta["width"], meta["height"], meta["period"],
        angle=meta.get("angle"),
        center=tuple(meta["center"]) if meta.get("center") else None,
        inner_radius=meta.get("inner_radius"), contrast=meta["contrast"],
        noise_sigma=meta["noise_sigma"], seed=meta["seed"])
    img = cgio.read_pgm(f"{prefix}.pgm")
    mask = cgio.read_mask_pgm(f"{prefix}.mask.pgm")
    img.mask = mask
    of = cgio.read_orientation_text(f"{prefix}.of.txt")
    rf = cgio.read_rf_text(f"{prefix}.rf.txt")
    curv = cgio.read_curvature_text(f"{prefix}.curv.txt")
    from .image import GrayImage

    return SyntheticPattern(GrayImage(img.pixels, mask), of, rf,
                            np.nan_to_num(curv), desc)


def _cmd_eval(args) -> int:
    pattern = _load_pattern(args.truth_prefix)
    est_of = cgio.read_orientation_text(args.of) if args.of else None
    est_rf = cgio.read_rf_text(args.rf) if args.rf else None
    est_curv = cgio.read_curvature_text(args.curv) if args.curv else None
    enhanced = cgio.load_image(args.enhanced) if args.enhanced else None
    report = evaluate(est_of, est_rf, est_curv, pattern,
                      border_margin=args.margin, enhanced=enhanced)
    text = json.dumps(report.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _cmd_batch(args) -> int:
    records = batch(args.input_dir, args.output_dir, _build_config(args),
                    emit=_emit_list(args.emit), jobs=args.jobs)
    errors = sum(1 for r in records if r["status"] != "ok")
    print(f"processed {len(records)} file(s), {errors} error(s); "
          f"summary: {Path(args.output_dir) / 'summary.jsonl'}")
    return 1 if errors else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curvedgabor",
        description="Curved-region contextual enhancement of oriented textures "
                    f"(kernel backend: {backend_name()})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="enhance a single image")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--emit", metavar="LIST", help="comma list of of,rf,curvature")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_enhance)

    p = sub.add_parser("ofield", help="estimate and export the orientation field")
    p.add_argument("input")
    p.add_argument("output", help="orientation text file")
    p.add_argument("--quiver", metavar="PNG", help="also write a quiver overlay")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_ofield)

    p = sub.add_parser("rfmap", help="estimate and export the ridge frequency map")
    p.add_argument("input")
    p.add_argument("output", help="frequency text file")
    p.add_argument("--png", metavar="PNG", help="also write a false-color image")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_rfmap)

    p = sub.add_parser("curvature", help="export the curvature map")
    p.add_argument("input")
    p.add_argument("output", help="grayscale curvature PNG")
    p.add_argument("--text", metavar="PATH", help="also write the text raster")
    p.add_argument("--overlay", metavar="PNG", help="also write a red overlay")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_curvature)

    p = sub.add_parser("synth", help="generate a synthetic pattern with ground truth")
    p.add_argument("out_prefix", help="output path prefix")
    p.add_argument("--kind", choices=("parallel", "concentric"), default="parallel")
    p.add_argument("--width", type=int, default=512)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--period", type=float, default=10.0)
    p.add_argument("--angle", type=float, default=0.0,
                   help="wave direction in degrees (parallel)")
    p.add_argument("--center", metavar="X,Y", help="ring center (concentric)")
    p.add_argument("--inner-radius", type=float, default=40.0)
    p.add_argument("--contrast", type=float, default=100.0)
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("eval", help="compare estimates against synthetic truth")
    p.add_argument("truth_prefix", help="prefix used by the synth subcommand")
    p.add_argument("--of", metavar="PATH")
    p.add_argument("--rf", metavar="PATH")
    p.add_argument("--curv", metavar="PATH")
    p.add_argument("--enhanced", metavar="IMAGE")
    p.add_argument("--margin", type=int, default=40)
    p.add_argument("--out", metavar="PATH", help="write the JSON report here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("batch", help="enhance a directory of images")
    p.add_argument("input_dir")
    p.add_argument("output_dir")
    p.add_argument("--emit", metavar="LIST", help="comma list of of,rf,curvature")
    p.add_argument("--jobs", type=int, default=1, metavar="N")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_batch)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
