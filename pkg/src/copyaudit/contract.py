"""Backend protocol contract checks, shared by the mock server tests and by
any real adapter implementation.

Each check raises AssertionError with a descriptive message on violation, so
the same functions can run under pytest or standalone against a live server.
"""

from __future__ import annotations

import base64

import numpy as np
import requests

from . import imagecore, maskops
from .imagecore import ImageBuffer


def _test_image(size: int = 24) -> ImageBuffer:
    ramp = np.linspace(0.0, 1.0, size)
    data = np.stack([np.tile(ramp, (size, 1))] * 3, axis=2)
    data[size // 4 : size // 2, size // 4 : size // 2, :] = 1.0
    return ImageBuffer.from_array(data)


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def check_segment_contract(base_url: str, timeout: float = 60.0) -> None:
    """POST /segment returns a same-size grayscale probability mask."""
    img = _test_image()
    resp = requests.post(
        base_url.rstrip("/") + "/segment",
        json={"image_png_b64": _b64(imagecore.encode_png(img))},
        timeout=timeout,
    )
    assert resp.status_code == 200, f"/segment returned {resp.status_code}"
    assert resp.headers.get("Content-Type", "").startswith("application/json")
    body = resp.json()
    assert "mask_png_b64" in body, "response missing mask_png_b64"
    soft = maskops.soft_mask_from_png(base64.b64decode(body["mask_png_b64"]))
    assert (soft.width, soft.height) == (img.width, img.height), (
        f"mask {soft.width}x{soft.height} != image {img.width}x{img.height}"
    )


def check_generate_contract(base_url: str, timeout: float = 600.0) -> None:
    """POST /generate returns a mask-sized image."""
    img = _test_image()
    soft = maskops.fallback_segment(img)
    mask = maskops.threshold_mask(soft, 0.5)
    resp = requests.post(
        base_url.rstrip("/") + "/generate",
        json={
            "prompt": "a plain test scene",
            "mask_png_b64": _b64(maskops.mask_to_png(mask)),
            "seed": 7,
            "steps": 1,
            "avoid_mask": True,
        },
        timeout=timeout,
    )
    assert resp.status_code == 200, f"/generate returned {resp.status_code}"
    body = resp.json()
    assert "image_png_b64" in body, "response missing image_png_b64"
    out = imagecore.decode_png(base64.b64decode(body["image_png_b64"]))
    assert (out.width, out.height) == (mask.width, mask.height), (
        f"image {out.width}x{out.height} != mask {mask.width}x{mask.height}"
    )


def check_error_handling(base_url: str, timeout: float = 60.0) -> None:
    """Malformed payloads get 4xx JSON errors; GET is rejected."""
    url = base_url.rstrip("/")

    resp = requests.post(url + "/segment", json={}, timeout=timeout)
    assert resp.status_code == 400, f"empty segment payload: {resp.status_code}"
    assert "error" in resp.json()

    resp = requests.post(
        url + "/segment", json={"image_png_b64": "!!not-base64!!"}, timeout=timeout
    )
    assert resp.status_code == 400, f"bad base64: {resp.status_code}"
    assert "error" in resp.json()

    resp = requests.post(
        url + "/generate",
        json={"mask_png_b64": _b64(maskops.mask_to_png(
            maskops.threshold_mask(maskops.fallback_segment(_test_image()), 0.5)
        ))},
        timeout=timeout,
    )
    assert resp.status_code == 400, f"missing prompt: {resp.status_code}"
    assert "error" in resp.json()

    resp = requests.get(url + "/segment", timeout=timeout)
    assert resp.status_code == 405, f"GET /segment: {resp.status_code}"


def check_full_contract(base_url: str, timeout: float = 600.0) -> None:
    """Every protocol check in one call."""
    check_segment_contract(base_url, timeout)
    check_generate_contract(base_url, timeout)
    check_error_handling(base_url, timeout)
