"""Image decoding, encoding, and pixel-domain conversions.

Images are held as float64 arrays with intensities normalized to [0, 1]
so downstream metrics can assume a dynamic range of 1.0.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DimensionMismatch, MalformedFile, UnsupportedFormat

# ITU-R BT.601 luminance weights
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class ImageBuffer:
    """Decoded raster image: (height, width, channels) float64 in [0, 1]."""

    width: int
    height: int
    channels: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.shape != (self.height, self.width, self.channels):
            arr = arr.reshape(self.height, self.width, self.channels)
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("intensities must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageBuffer":
        """Build from an (H, W) or (H, W, C) array of [0, 1] intensities."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, data=arr)


def decode_png(data: bytes) -> ImageBuffer:
    """Decode an 8-bit PNG (grayscale, RGB, or RGBA; alpha dropped).

    Raises MalformedFile for unparseable bytes and UnsupportedFormat for
    bit depths other than 8 or unexpected color modes.
    """
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as e:
        raise MalformedFile(f"cannot decode PNG: {e}") from None

    mode = img.mode
    if mode in ("I", "I;16", "I;16B", "F"):
        raise UnsupportedFormat(f"unsupported bit depth (mode {mode})")
    if mode == "P":
        # palette PNGs expand to their underlying 8-bit colors
        img = img.convert("RGBA" if "transparency" in img.info else "RGB")
        mode = img.mode
    if mode == "RGBA":
        img = Image.merge("RGB", img.split()[:3])  # drop alpha, no blending
    elif mode == "LA":
        img = img.split()[0]
    elif mode not in ("L", "RGB", "1"):
        raise UnsupportedFormat(f"unsupported color mode {mode}")
    if img.mode == "1":
        img = img.convert("L")

    arr = np.asarray(img, dtype=np.float64) / 255.0
    return ImageBuffer.from_array(arr)


def encode_png(img: ImageBuffer) -> bytes:
    """Encode as 8-bit non-interlaced PNG; intensities quantized by round(i*255)."""
    q = quantize(img)
    if img.channels == 1:
        pil = Image.fromarray(q[:, :, 0], mode="L")
    else:
        pil = Image.fromarray(q, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def quantize(img: ImageBuffer) -> np.ndarray:
    """8-bit quantization: round half up, matching the PNG encoder."""
    return np.floor(img.data * 255.0 + 0.5).astype(np.uint8)


def to_grayscale(img: ImageBuffer) -> ImageBuffer:
    """Collapse RGB to luminance (BT.601 weights); grayscale passes through."""
    if img.channels == 1:
        return img
    lum = img.data @ _LUMA
    return ImageBuffer.from_array(np.clip(lum, 0.0, 1.0))


def _bilinear_axis(arr: np.ndarray, new_len: int, axis: int) -> np.ndarray:
    """Resample one axis bilinearly using pixel-center alignment."""
    old_len = arr.shape[axis]
    if new_len == old_len:
        return arr
    scale = old_len / new_len
    pos = (np.arange(new_len) + 0.5) * scale - 0.5
    pos = np.clip(pos, 0.0, old_len - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, old_len - 1)
    frac = pos - lo
    a = np.take(arr, lo, axis=axis)
    b = np.take(arr, hi, axis=axis)
    shape = [1] * arr.ndim
    shape[axis] = new_len
    f = frac.reshape(shape)
    return a * (1.0 - f) + b * f


def resize_bilinear(arr: np.ndarray, new_h: int, new_w: int) -> np.ndarray:
    """Bilinear resize of an (H, W) or (H, W, C) array; identity if unchanged."""
    out = _bilinear_axis(arr, new_h, axis=0)
    return _bilinear_axis(out, new_w, axis=1)


def resize_image(img: ImageBuffer, new_w: int, new_h: int) -> ImageBuffer:
    """Bilinear resize of an ImageBuffer."""
    if new_w == img.width and new_h == img.height:
        return img
    out = resize_bilinear(img.data, new_h, new_w)
    return ImageBuffer.from_array(np.clip(out, 0.0, 1.0))


def require_same_dims(a: ImageBuffer, b: ImageBuffer, channels: bool = False):
    """Raise DimensionMismatch unless a and b share width/height (and channels)."""
    if a.width != b.width or a.height != b.height:
        raise DimensionMismatch(
            f"{a.width}x{a.height} vs {b.width}x{b.height}"
        )
    if channels and a.channels != b.channels:
        raise DimensionMismatch(f"channels {a.channels} vs {b.channels}")
