"""Batch command-line frontend.

Subcommands: segment, diffuse, fbb, metrics, phantom. All structured output
is JSON or CSV, rasters are binary PGM, and figures are PNG; diagnostics go
to stderr only. Exit codes: 0 success, 1 error, 2 no detection.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import fbb, imgio, ocsvm, phantom, pipeline, preprocess, report

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NO_DETECTION = 2


def _atomic_write_text(path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), prefix=".tmp_cli_")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_run_config(path):
    """Pipeline config plus CLI-only keys (truth mask path, figure toggle)."""
    extras = {"truth": None, "figures": False}
    if path is None:
        return pipeline.PipelineConfig(), extras
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("truth", "figures"):
        if key in doc:
            extras[key] = doc.pop(key)
    return pipeline.config_from_dict(doc), extras


def _box_json(res: fbb.FbbResult) -> str:
    doc = {"found": res.found, "side": res.side.value, "axis_col": res.axis_col}
    if res.box is not None:
        doc.update(
            row_min=res.box.row_min,
            row_max=res.box.row_max,
            col_min=res.box.col_min,
            col_max=res.box.col_max,
        )
    return json.dumps(doc, indent=2)


def cmd_segment(args) -> int:
    config, extras = _load_run_config(args.config)
    image = imgio.load_gray_pgm(args.input)
    result = pipeline.segment(image, config, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)

    metrics = None
    if extras["truth"]:
        truth = imgio.load_mask_pgm(extras["truth"])
        metrics = pipeline.evaluate(result.mask, truth, result.head.mask)

    imgio.write_mask_pgm(result.mask, os.path.join(args.out, "mask.pgm"))
    overlay = imgio.render_overlay(image, result.mask, result.box.box)
    imgio.write_gray_pgm(overlay, os.path.join(args.out, "overlay.pgm"))
    _atomic_write_text(os.path.join(args.out, "box.json"), _box_json(result.box))
    if result.model is not None:
        _atomic_write_text(
            os.path.join(args.out, "model.json"), ocsvm.model_to_json(result.model)
        )
    if metrics is not None:
        _atomic_write_text(
            os.path.join(args.out, "metrics.json"), pipeline.metrics_to_json(metrics)
        )
        report.write_metrics_csv(metrics, os.path.join(args.out, "metrics.csv"))
    if extras["figures"]:
        report.render_report_figure(
            image, result.mask, result.box.box, metrics, os.path.join(args.out, "report.png")
        )
    return EXIT_OK if result.box.found else EXIT_NO_DETECTION


def cmd_diffuse(args) -> int:
    config, _ = _load_run_config(args.config)
    params = config.diffusion
    if args.neighborhood is not None:
        params = preprocess.DiffusionParams(
            lam=params.lam,
            k=params.k,
            iterations=params.iterations,
            function=params.function,
            neighborhood=args.neighborhood,
        )
    image = imgio.load_gray_pgm(args.input)
    out = preprocess.diffuse(image, params)
    os.makedirs(args.out, exist_ok=True)
    imgio.write_gray_pgm(out, os.path.join(args.out, "diffused.pgm"))
    return EXIT_OK


def cmd_fbb(args) -> int:
    config, _ = _load_run_config(args.config)
    image = imgio.load_gray_pgm(args.input)
    head = preprocess.skull_strip(image)
    res = fbb.find_bounding_box(image, head.mask, config.bin_count, config.detection_threshold)
    os.makedirs(args.out, exist_ok=True)
    _atomic_write_text(os.path.join(args.out, "box.json"), _box_json(res))
    return EXIT_OK if res.found else EXIT_NO_DETECTION


def cmd_metrics(args) -> int:
    predicted = imgio.load_mask_pgm(args.predicted)
    truth = imgio.load_mask_pgm(args.truth)
    if args.domain:
        domain = imgio.load_mask_pgm(args.domain)
    else:
        domain = imgio.BinaryMask(np.ones_like(truth.bits))
    metrics = pipeline.evaluate(predicted, truth, domain)
    os.makedirs(args.out, exist_ok=True)
    _atomic_write_text(os.path.join(args.out, "metrics.json"), pipeline.metrics_to_json(metrics))
    report.write_metrics_csv(metrics, os.path.join(args.out, "metrics.csv"))
    return EXIT_OK


def cmd_phantom(args) -> int:
    if args.config:
        with open(args.config) as fh:
            spec = phantom.spec_from_dict(json.load(fh))
    else:
        spec = phantom.standard_lesion_spec()
    if args.seed is not None:
        spec = phantom.replace(spec, seed=args.seed)
    image, head_truth, lesion_truth = phantom.generate(spec)
    os.makedirs(args.out, exist_ok=True)
    imgio.write_gray_pgm(image, os.path.join(args.out, "image.pgm"))
    imgio.write_mask_pgm(head_truth, os.path.join(args.out, "head_truth.pgm"))
    imgio.write_mask_pgm(lesion_truth, os.path.join(args.out, "lesion_truth.pgm"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tumorseg", description="Symmetry-guided anomaly segmentation for grayscale rasters"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="run the full pipeline on a PGM image")
    p.add_argument("--input", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("diffuse", help="denoise an image with anisotropic diffusion")
    p.add_argument("--input", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--neighborhood", type=int, choices=(4, 8), default=None)
    p.set_defaults(func=cmd_diffuse)

    p = sub.add_parser("fbb", help="locate the asymmetric region's bounding box")
    p.add_argument("--input", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fbb)

    p = sub.add_parser("metrics", help="score a predicted mask against ground truth")
    p.add_argument("--predicted", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--domain", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("phantom", help="generate a synthetic test image with ground truth")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # single-line diagnostic, no traceback for users
        print(f"tumorseg: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
