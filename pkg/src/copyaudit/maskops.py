"""Binary segmentation masks: thresholding, up-sampling, selection, overlap.

Masks serialize as 8-bit grayscale PNG (0 = background, 255 = foreground);
the same encoding is used on the backend wire protocol.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import imagecore
from .errors import DimensionMismatch, InvalidThreshold
from .imagecore import ImageBuffer


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel boolean region map, shape (height, width)."""

    width: int
    height: int
    bits: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.bits, dtype=bool).reshape(self.height, self.width)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "bits", arr)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BinaryMask":
        arr = np.asarray(arr, dtype=bool)
        h, w = arr.shape
        return cls(width=w, height=h, bits=arr)

    def count(self) -> int:
        return int(self.bits.sum())


@dataclass(frozen=True)
class SoftMask:
    """Per-pixel foreground probability map, values in [0, 1]."""

    width: int
    height: int
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.probs, dtype=np.float64).reshape(
            self.height, self.width
        )
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "SoftMask":
        arr = np.asarray(arr, dtype=np.float64)
        h, w = arr.shape
        return cls(width=w, height=h, probs=arr)


def threshold_mask(soft: SoftMask, t: float) -> BinaryMask:
    """Binarize with >= semantics at the boundary."""
    if not (0.0 <= t <= 1.0):
        raise InvalidThreshold(f"threshold {t} outside [0, 1]")
    return BinaryMask.from_array(soft.probs >= t)


def upsample_mask(mask: BinaryMask, new_w: int, new_h: int) -> BinaryMask:
    """Resample the 0/1 field bilinearly, then re-threshold at 0.5.

    Identity when the dimensions are unchanged.
    """
    if new_w < 1 or new_h < 1:
        raise ValueError("target dimensions must be >= 1")
    if new_w == mask.width and new_h == mask.height:
        return mask
    field01 = mask.bits.astype(np.float64)
    out = imagecore.resize_bilinear(field01, new_h, new_w)
    return BinaryMask.from_array(out >= 0.5)


def mask_iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union; 0.0 when both masks are empty."""
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatch(
            f"{a.width}x{a.height} vs {b.width}x{b.height}"
        )
    inter = int(np.logical_and(a.bits, b.bits).sum())
    union = int(np.logical_or(a.bits, b.bits).sum())
    if union == 0:
        return 0.0
    return inter / union


def largest_component_mask(mask: BinaryMask) -> BinaryMask:
    """Keep only the largest 4-connected foreground component.

    Ties break toward the component whose first pixel in row-major order
    comes earliest, so results are reproducible.
    """
    bits = mask.bits
    labels = np.zeros(bits.shape, dtype=np.int32)
    sizes = [0]  # index 0 = background
    h, w = bits.shape
    next_label = 0
    # BFS flood fill in row-major seed order; label order encodes tie-break
    for sy, sx in zip(*np.nonzero(bits)):
        if labels[sy, sx]:
            continue
        next_label += 1
        labels[sy, sx] = next_label
        size = 1
        queue = deque([(sy, sx)])
        while queue:
            y, x = queue.popleft()
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if 0 <= ny < h and 0 <= nx < w and bits[ny, nx] and not labels[ny, nx]:
                    labels[ny, nx] = next_label
                    size += 1
                    queue.append((ny, nx))
        sizes.append(size)
    if next_label == 0:
        return mask
    best = int(np.argmax(sizes))  # argmax returns the first maximum
    return BinaryMask.from_array(labels == best)


def fallback_segment(img: ImageBuffer) -> SoftMask:
    """Deterministic CPU-only segmenter: deviation of luminance from its mean.

    probs = |lum - mean| / max|lum - mean|, or all zeros for constant images.
    """
    lum = imagecore.to_grayscale(img).data[:, :, 0]
    dev = np.abs(lum - lum.mean())
    peak = dev.max()
    if peak == 0.0:
        return SoftMask.from_array(np.zeros_like(lum))
    return SoftMask.from_array(dev / peak)


def mask_to_png(mask: BinaryMask) -> bytes:
    """Serialize as 8-bit grayscale PNG (0/255)."""
    img = ImageBuffer.from_array(mask.bits.astype(np.float64))
    return imagecore.encode_png(img)


def soft_mask_to_png(soft: SoftMask) -> bytes:
    """Serialize probabilities as 8-bit grayscale PNG (value/255)."""
    img = ImageBuffer.from_array(soft.probs)
    return imagecore.encode_png(img)


def soft_mask_from_png(data: bytes) -> SoftMask:
    """Decode a grayscale PNG into per-pixel probabilities (value/255)."""
    img = imagecore.decode_png(data)
    gray = imagecore.to_grayscale(img)
    return SoftMask.from_array(gray.data[:, :, 0])


def mask_from_png(data: bytes) -> BinaryMask:
    """Decode a 0/255 mask PNG; values >= 128 count as foreground."""
    soft = soft_mask_from_png(data)
    return threshold_mask(soft, 0.5)
