"""Command-line surface: audit, batch, segment, blur, compare, serve-mock.

Machine-readable JSON goes to stdout, diagnostics to stderr.
Exit codes: 0 success, 1 pipeline/metric error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import backends, blur, imagecore, maskops, metrics, pipeline
from .errors import CopyAuditError
from .pipeline import PipelineConfig

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2

CONFIG_ENV = "COPYAUDIT_CONFIG"


def _load_config(args) -> PipelineConfig:
    """Resolve config with precedence flag > file > default."""
    values: dict = {}
    config_path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV)
    if config_path:
        with open(config_path, encoding="utf-8") as f:
            values.update(json.load(f))
    overrides = {
        "blur_sigma": getattr(args, "sigma", None),
        "blur_radius": getattr(args, "radius", None),
        "seed": getattr(args, "seed", None),
        "steps": getattr(args, "steps", None),
        "target_resolution": getattr(args, "resolution", None),
    }
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    return PipelineConfig.from_dict(values)


def _read_image(path: str) -> imagecore.ImageBuffer:
    return imagecore.decode_png(Path(path).read_bytes())


def _emit(record_dict: dict) -> None:
    json.dump(record_dict, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_audit(args) -> int:
    cfg = _load_config(args)
    record = pipeline.audit_file(cfg, args.input, args.prompt, args.out)
    _emit(record.to_dict())
    return EXIT_OK if record.report is not None else EXIT_ERROR


def cmd_batch(args) -> int:
    cfg = _load_config(args)
    manifest = pipeline.load_manifest(args.manifest)
    records = pipeline.run_batch(cfg, manifest, out_dir=args.out, workers=args.workers)
    _emit([r.to_dict() for r in records])
    return EXIT_OK if all(r.report is not None for r in records) else EXIT_ERROR


def cmd_segment(args) -> int:
    cfg = _load_config(args)
    img = _read_image(args.input)
    soft = pipeline.segment_stage(cfg, img)
    mask = maskops.threshold_mask(soft, cfg.mask_threshold)
    mask = maskops.largest_component_mask(mask)
    Path(args.output).write_bytes(maskops.mask_to_png(mask))
    print(f"wrote {args.output}", file=sys.stderr)
    return EXIT_OK


def cmd_blur(args) -> int:
    img = _read_image(args.input)
    radius = args.radius if args.radius is not None else blur.default_radius(args.sigma)
    kernel = blur.build_kernel(args.sigma, radius)
    out = blur.gaussian_blur(img, kernel)
    Path(args.output).write_bytes(imagecore.encode_png(out))
    print(f"wrote {args.output}", file=sys.stderr)
    return EXIT_OK


def cmd_compare(args) -> int:
    a = _read_image(args.a)
    b = _read_image(args.b)
    if a.channels != b.channels:
        a = imagecore.to_grayscale(a)
        b = imagecore.to_grayscale(b)
    ssim_value = metrics.ssim(a, b)
    fid_value = metrics.fid_images(a, b, args.fid_patch, args.fid_stride)
    psnr_value = metrics.psnr(a, b)
    ssim_band, fid_band, overall = metrics.classify(ssim_value, fid_value)
    _emit(
        {
            "ssim": ssim_value,
            "fid": fid_value,
            "psnr": "inf" if math.isinf(psnr_value) else psnr_value,
            "bands": {"ssim": ssim_band, "fid": fid_band, "overall_risk": overall},
        }
    )
    return EXIT_OK


def cmd_serve_mock(args) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    try:
        backends.serve_mock(args.port)
    except OSError as e:
        print(f"cannot bind port {args.port}: {e}", file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="copyaudit",
        description="Mask-guided generation audit: similarity metrics and risk bands",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_config_flags(p):
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--sigma", type=float, default=None, help="blur sigma")
        p.add_argument("--radius", type=int, default=None, help="blur kernel radius")
        p.add_argument("--steps", type=int, default=None)
        p.add_argument("--resolution", type=int, default=None)

    p = sub.add_parser("audit", help="audit a single image")
    p.add_argument("--input", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--out", default="audit_out")
    add_config_flags(p)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("batch", help="audit every item in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default="audit_out")
    p.add_argument("--workers", type=int, default=None)
    add_config_flags(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("segment", help="run the segmentation stage alone")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    add_config_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("blur", help="run the blur stage alone")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--radius", type=int, default=None)
    p.set_defaults(func=cmd_blur)

    p = sub.add_parser("compare", help="similarity metrics for an image pair")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--fid-patch", type=int, default=16)
    p.add_argument("--fid-stride", type=int, default=8)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("serve-mock", help="serve mock backends over HTTP")
    p.add_argument("--port", type=int, default=8642)
    p.set_defaults(func=cmd_serve_mock)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CopyAuditError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
