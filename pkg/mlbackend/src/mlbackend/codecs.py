"""PNG/base64 payload helpers for the wire protocol."""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image


class PayloadError(ValueError):
    """Client payload cannot be decoded."""


def decode_image_b64(text: str) -> np.ndarray:
    """Base64 PNG -> float32 RGB array (H, W, 3) in [0, 1]."""
    if not isinstance(text, str) or not text:
        raise PayloadError("expected a non-empty base64 string")
    try:
        raw = base64.b64decode(text, validate=True)
    except Exception as e:
        raise PayloadError(f"invalid base64: {e}") from None
    try:
        img = Image.open(io.BytesIO(raw))
        img.load()
    except Exception as e:
        raise PayloadError(f"invalid PNG: {e}") from None
    img = img.convert("RGB")
    return np.asarray(img, dtype=np.float32) / 255.0


def decode_mask_b64(text: str) -> np.ndarray:
    """Base64 grayscale PNG -> boolean mask (value >= 128)."""
    arr = decode_image_b64(text)
    return arr.mean(axis=2) >= 0.5


def encode_gray_b64(arr: np.ndarray) -> str:
    """Float (H, W) array in [0, 1] -> base64 grayscale PNG."""
    q = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(q, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def encode_rgb_b64(arr: np.ndarray) -> str:
    """Float (H, W, 3) array in [0, 1] -> base64 RGB PNG."""
    q = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(q, mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")
