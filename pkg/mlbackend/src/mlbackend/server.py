"""FastAPI app implementing the copyaudit backend wire protocol.

Routes, schemas, and status codes match the mock backend exactly, plus
GET /health reporting "loading" until models are up. Inference runs one
request at a time per process; the HTTP layer stays concurrent.
"""

from __future__ import annotations

import logging
import threading
from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import codecs
from .codecs import PayloadError
from .config import AdapterConfig
from .models import GenerationModel, SegmentationModel

logger = logging.getLogger(__name__)


class ModelRegistry:
    """Loads configured models in the background; tracks readiness."""

    def __init__(self, cfg: AdapterConfig):
        self.cfg = cfg
        self.segmentation: SegmentationModel | None = None
        self.generation: GenerationModel | None = None
        self.generation_error: str | None = None
        self.inference_lock = threading.Lock()
        self._load_done = threading.Event()

    def load(self):
        try:
            self.segmentation = SegmentationModel(self.cfg)
            logger.info("segmentation model ready: %s", self.cfg.segmentation_model_id)
            if self.cfg.generation_model_id:
                try:
                    self.generation = GenerationModel(self.cfg)
                    logger.info(
                        "generation model ready: %s", self.cfg.generation_model_id
                    )
                except Exception as e:
                    self.generation_error = str(e)
                    logger.error("generation model failed to load: %s", e)
        finally:
            self._load_done.set()

    def load_async(self):
        threading.Thread(target=self.load, daemon=True).start()

    @property
    def ready(self) -> bool:
        return self._load_done.is_set() and self.segmentation is not None


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(cfg: AdapterConfig, load_async: bool = True) -> FastAPI:
    registry = ModelRegistry(cfg)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if load_async:
            registry.load_async()
        else:
            registry.load()
        yield

    app = FastAPI(title="mlbackend adapter", lifespan=lifespan)
    app.state.registry = registry

    @app.get("/health")
    def health():
        return {"status": "ready" if registry.ready else "loading"}

    @app.post("/segment")
    async def segment(request: Request, select: str = "score"):
        if not registry.ready:
            return _error(503, "model is loading")
        try:
            body = await request.json()
        except Exception:
            return _error(400, "body must be valid JSON")
        if not isinstance(body, dict) or "image_png_b64" not in body:
            return _error(400, "missing 'image_png_b64'")
        try:
            image = codecs.decode_image_b64(body["image_png_b64"])
        except PayloadError as e:
            return _error(400, str(e))
        if select not in ("score", "largest"):
            return _error(400, f"unknown select mode: {select}")
        try:
            with registry.inference_lock:
                soft = registry.segmentation.soft_mask(image, select)
        except Exception as e:
            logger.exception("segmentation failed")
            return _error(500, f"inference failure: {e}")
        return {"mask_png_b64": codecs.encode_gray_b64(soft)}

    @app.post("/generate")
    async def generate(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "body must be valid JSON")
        if not isinstance(body, dict):
            return _error(400, "body must be a JSON object")
        if "prompt" not in body:
            return _error(400, "missing 'prompt'")
        if not isinstance(body["prompt"], str) or not body["prompt"]:
            return _error(400, "'prompt' must be a non-empty string")
        if "mask_png_b64" not in body:
            return _error(400, "missing 'mask_png_b64'")
        try:
            mask = codecs.decode_mask_b64(body["mask_png_b64"])
        except PayloadError as e:
            return _error(400, str(e))
        try:
            seed = int(body.get("seed", 0))
            steps = int(body.get("steps", 30))
            avoid_mask = bool(body.get("avoid_mask", True))
        except (TypeError, ValueError):
            return _error(400, "seed/steps must be integers")
        if steps < 1:
            return _error(400, "steps must be >= 1")

        if not registry._load_done.is_set():
            return _error(503, "model is loading")
        if registry.generation is None:
            detail = registry.generation_error or "generation model not configured"
            return _error(503, f"generation unavailable: {detail}")
        try:
            with registry.inference_lock:
                image = registry.generation.generate(
                    body["prompt"], mask, seed, steps, avoid_mask
                )
        except Exception as e:
            logger.exception("generation failed")
            return _error(500, f"inference failure: {e}")
        return {"image_png_b64": codecs.encode_rgb_b64(image)}

    return app
