"""Wire-protocol clients for the segmentation and generation backends,
plus deterministic in-process mocks and a mock HTTP server.

Protocol: JSON over HTTP with base64-encoded PNG payloads.
  POST /segment  {"image_png_b64": ...} -> {"mask_png_b64": ...}
  POST /generate {"prompt", "mask_png_b64", "seed", "steps", "avoid_mask"}
                 -> {"image_png_b64": ...}
Errors come back as {"error": "<message>"} with a 4xx/5xx status.
"""

from __future__ import annotations

import base64
import json
import logging
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import requests

from . import imagecore, maskops
from .errors import BackendTimeout, BackendUnavailable, ProtocolError
from .imagecore import ImageBuffer
from .maskops import BinaryMask, SoftMask

logger = logging.getLogger(__name__)

MOCK_LATTICE_SCALE = 8  # noise lattice at 1/8 resolution
MOCK_MEAN_PULL = 0.8  # weight pulling masked pixels toward the global mean


@dataclass(frozen=True)
class BackendEndpoint:
    """Location plus retry policy for one backend service."""

    base_url: str
    timeout: float = 120.0
    retries: int = 2
    backoff: float = 1.0  # first retry delay; doubles per attempt

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


@dataclass(frozen=True)
class GenerationRequest:
    """One mask-conditioned generation request."""

    prompt: str
    mask: BinaryMask
    seed: int = 0
    steps: int = 30
    avoid_mask: bool = True

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(text: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except Exception as e:
        raise ProtocolError(f"invalid base64 payload: {e}") from None


def _post_with_retries(endpoint: BackendEndpoint, path: str, payload: dict) -> dict:
    """POST JSON; retry on 5xx and timeouts, never on 4xx."""
    url = endpoint.base_url.rstrip("/") + path
    attempts = endpoint.retries + 1
    last_err: Exception | None = None
    for attempt in range(attempts):
        if attempt > 0:
            time.sleep(endpoint.backoff * (2 ** (attempt - 1)))
        try:
            resp = requests.post(url, json=payload, timeout=endpoint.timeout)
        except requests.Timeout:
            last_err = BackendTimeout(f"timeout after {endpoint.timeout}s: {url}")
            continue
        except requests.ConnectionError as e:
            last_err = BackendUnavailable(f"connection failed: {e}")
            continue
        if resp.status_code >= 500:
            last_err = ProtocolError(f"server error {resp.status_code}")
            continue
        if resp.status_code != 200:
            raise ProtocolError(
                f"backend returned {resp.status_code}: {resp.text[:200]}"
            )
        try:
            return resp.json()
        except ValueError:
            raise ProtocolError("response is not valid JSON") from None
    raise BackendUnavailable(
        f"backend at {url} failed after {attempts} attempts: {last_err}"
    )


def segment(endpoint: BackendEndpoint, img: ImageBuffer) -> SoftMask:
    """Request a soft segmentation mask for the image."""
    payload = {"image_png_b64": _b64(imagecore.encode_png(img))}
    body = _post_with_retries(endpoint, "/segment", payload)
    if "mask_png_b64" not in body:
        raise ProtocolError("response missing 'mask_png_b64'")
    soft = maskops.soft_mask_from_png(_unb64(body["mask_png_b64"]))
    if (soft.width, soft.height) != (img.width, img.height):
        raise ProtocolError(
            f"mask dimensions {soft.width}x{soft.height} do not match "
            f"image {img.width}x{img.height}"
        )
    return soft


def generate(endpoint: BackendEndpoint, req: GenerationRequest) -> ImageBuffer:
    """Request a mask-conditioned generated image."""
    payload = {
        "prompt": req.prompt,
        "mask_png_b64": _b64(maskops.mask_to_png(req.mask)),
        "seed": req.seed,
        "steps": req.steps,
        "avoid_mask": req.avoid_mask,
    }
    body = _post_with_retries(endpoint, "/generate", payload)
    if "image_png_b64" not in body:
        raise ProtocolError("response missing 'image_png_b64'")
    img = imagecore.decode_png(_unb64(body["image_png_b64"]))
    if (img.width, img.height) != (req.mask.width, req.mask.height):
        raise ProtocolError(
            f"image dimensions {img.width}x{img.height} do not match "
            f"mask {req.mask.width}x{req.mask.height}"
        )
    return img


# ---------------------------------------------------------------------------
# deterministic mocks


def _splitmix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer; uint64 in, uint64 out, platform-stable."""
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def _prompt_key(prompt: str) -> int:
    import hashlib

    digest = hashlib.sha256(prompt.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def mock_segment(img: ImageBuffer) -> SoftMask:
    """Mock segmentation: delegates to the deterministic fallback segmenter."""
    return maskops.fallback_segment(img)


def mock_generate(req: GenerationRequest, dims: tuple[int, int]) -> ImageBuffer:
    """Deterministic stand-in for the diffusion backend.

    Smooth RGB value noise keyed by (prompt, seed): an integer-hashed lattice
    at 1/8 resolution is bilinearly upsampled, so outputs are identical across
    runs and platforms. With avoid_mask set, pixels inside the mask are pulled
    toward the global mean, destroying structural correlation with the mask.
    """
    w, h = dims
    gw = w // MOCK_LATTICE_SCALE + 2
    gh = h // MOCK_LATTICE_SCALE + 2
    key = np.uint64((_prompt_key(req.prompt) ^ (req.seed & 0xFFFFFFFFFFFFFFFF)))

    iy, ix, ic = np.meshgrid(
        np.arange(gh, dtype=np.uint64),
        np.arange(gw, dtype=np.uint64),
        np.arange(3, dtype=np.uint64),
        indexing="ij",
    )
    with np.errstate(over="ignore"):
        mixed = (
            key
            + ix * np.uint64(0xC2B2AE3D27D4EB4F)
            + iy * np.uint64(0x165667B19E3779F9)
            + ic * np.uint64(0x27D4EB2F165667C5)
        )
        lattice = _splitmix64(mixed).astype(np.float64) / float(2**64)

    img = imagecore.resize_bilinear(lattice, h, w)
    if req.avoid_mask:
        mean = img.mean()
        inside = req.mask.bits[:, :, None]
        img = np.where(inside, MOCK_MEAN_PULL * mean + (1 - MOCK_MEAN_PULL) * img, img)
    return ImageBuffer.from_array(np.clip(img, 0.0, 1.0))


# ---------------------------------------------------------------------------
# mock HTTP server


class _MockHandler(BaseHTTPRequestHandler):
    """Serves /segment and /generate backed by the deterministic mocks."""

    def log_message(self, fmt, *args):  # one line per request via logging
        logger.info("%s - %s", self.address_string(), fmt % args)

    def _send_json(self, status: int, body: dict):
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        body = json.loads(raw)
        if not isinstance(body, dict):
            raise ValueError("body must be a JSON object")
        return body

    def do_GET(self):
        self._send_json(405, {"error": "method not allowed"})

    def do_POST(self):
        try:
            if self.path == "/segment":
                self._handle_segment()
            elif self.path == "/generate":
                self._handle_generate()
            else:
                self._send_json(404, {"error": f"no such route: {self.path}"})
        except (ValueError, KeyError, TypeError) as e:
            self._send_json(400, {"error": str(e)})
        except Exception as e:  # pragma: no cover - defensive
            self._send_json(500, {"error": str(e)})

    def _handle_segment(self):
        body = self._read_json()
        if "image_png_b64" not in body:
            raise KeyError("missing 'image_png_b64'")
        try:
            img = imagecore.decode_png(
                base64.b64decode(body["image_png_b64"], validate=True)
            )
        except Exception as e:
            raise ValueError(f"bad image payload: {e}") from None
        soft = mock_segment(img)
        self._send_json(200, {"mask_png_b64": _b64(maskops.soft_mask_to_png(soft))})

    def _handle_generate(self):
        body = self._read_json()
        for field in ("prompt", "mask_png_b64"):
            if field not in body:
                raise KeyError(f"missing '{field}'")
        if not isinstance(body["prompt"], str) or not body["prompt"]:
            raise ValueError("'prompt' must be a non-empty string")
        try:
            mask = maskops.mask_from_png(
                base64.b64decode(body["mask_png_b64"], validate=True)
            )
        except Exception as e:
            raise ValueError(f"bad mask payload: {e}") from None
        req = GenerationRequest(
            prompt=body["prompt"],
            mask=mask,
            seed=int(body.get("seed", 0)),
            steps=int(body.get("steps", 30)),
            avoid_mask=bool(body.get("avoid_mask", True)),
        )
        img = mock_generate(req, (mask.width, mask.height))
        self._send_json(200, {"image_png_b64": _b64(imagecore.encode_png(img))})


def make_mock_server(port: int, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """Build (but do not start) the mock backend HTTP server."""
    return ThreadingHTTPServer((host, port), _MockHandler)


def serve_mock(port: int, host: str = "127.0.0.1"):
    """Run the mock backend server until interrupted."""
    server = make_mock_server(port, host)
    logger.info("mock backend listening on %s:%d", host, server.server_address[1])
    try:
        server.serve_forever()
    finally:
        server.server_close()
