"""Gaussian blur post-processing: kernel construction and separable convolution."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter
from .imagecore import ImageBuffer


@dataclass(frozen=True)
class GaussianKernel:
    """Separable Gaussian kernel; the 2-D kernel is weights_1d ⊗ weights_1d."""

    sigma: float
    radius: int
    weights_1d: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights_1d, dtype=np.float64).copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights_1d", w)


def default_radius(sigma: float) -> int:
    """Kernel radius covering ±3σ, never below 1."""
    return max(1, math.ceil(3.0 * sigma))


def build_kernel(sigma: float, radius: int) -> GaussianKernel:
    """Sample exp(-(i-radius)²/(2σ²)) and normalize to sum 1.

    Normalization cancels the continuous 1/(2πσ²) prefactor.
    """
    if sigma <= 0:
        raise InvalidParameter(f"sigma must be > 0, got {sigma}")
    if radius < 1:
        raise InvalidParameter(f"radius must be >= 1, got {radius}")
    offsets = np.arange(2 * radius + 1, dtype=np.float64) - radius
    w = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    w /= w.sum()
    return GaussianKernel(sigma=sigma, radius=radius, weights_1d=w)


def _convolve_rows(arr: np.ndarray, weights: np.ndarray, radius: int) -> np.ndarray:
    """1-D convolution along axis 1 with reflect-101 borders.

    Tap accumulation runs in a fixed order so results are reproducible.
    """
    pad = [(0, 0)] * arr.ndim
    pad[1] = (radius, radius)
    padded = np.pad(arr, pad, mode="reflect")
    w = arr.shape[1]
    out = np.zeros_like(arr)
    for k, wk in enumerate(weights):
        out += wk * padded[:, k : k + w]
    return out


def gaussian_blur(img: ImageBuffer, kernel: GaussianKernel) -> ImageBuffer:
    """Per-channel separable blur (horizontal pass, then vertical)."""
    data = img.data
    out = _convolve_rows(data, kernel.weights_1d, kernel.radius)
    out = np.swapaxes(
        _convolve_rows(np.swapaxes(out, 0, 1), kernel.weights_1d, kernel.radius),
        0,
        1,
    )
    # convex weights keep values in range; clip only sheds float dust
    out = np.clip(out, 0.0, 1.0)
    return ImageBuffer.from_array(out)
