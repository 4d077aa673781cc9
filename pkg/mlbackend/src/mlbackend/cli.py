"""Run the adapter server: `mlbackend --port 8700 [--generation-model <id>]`."""

from __future__ import annotations

import argparse
import logging

import uvicorn

from .config import SEGMENTATION_DEFAULT, AdapterConfig
from .server import create_app


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlbackend")
    parser.add_argument("--port", type=int, default=8700)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--device", default="cpu")
    parser.add_argument(
        "--segmentation-model",
        default=SEGMENTATION_DEFAULT,
        help="model id; append ':untrained' for random weights (offline testing)",
    )
    parser.add_argument(
        "--generation-model",
        default="",
        help="diffusers pipeline id, optionally 'sd_id|controlnet_id'; "
        "empty disables /generate",
    )
    parser.add_argument("--score-threshold", type=float, default=0.05)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    args = build_parser().parse_args(argv)
    cfg = AdapterConfig(
        segmentation_model_id=args.segmentation_model,
        generation_model_id=args.generation_model,
        device=args.device,
        port=args.port,
        score_threshold=args.score_threshold,
    )
    app = create_app(cfg)
    uvicorn.run(app, host=args.host, port=cfg.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
