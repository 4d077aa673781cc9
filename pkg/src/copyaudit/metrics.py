"""Similarity measurement: SSIM, PSNR, patch-feature FID, band classification.

FID here is defined over deterministic patch statistics rather than Inception
activations, so absolute magnitudes differ from neural-network FID; band
ordering and labels are what downstream consumers rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    ImageTooSmall,
    InsufficientSamples,
    NumericalFailure,
    OutOfRange,
)
from .imagecore import ImageBuffer, require_same_dims, to_grayscale

SSIM_WINDOW = 11
SSIM_WINDOW_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 1.0  # intensities normalized to [0, 1]

COV_EPSILON = 1e-6

# band labels, least similar first; index doubles as inverse risk severity
SSIM_BANDS = ("poor", "low", "moderate", "high")
FID_BANDS = ("very-low", "low", "moderate", "high")
RISK_LABELS = ("very-low-risk", "low-risk", "moderate-risk", "high-risk")


@dataclass(frozen=True)
class FeatureMatrix:
    """n feature vectors of dimension d, one row per sample."""

    n: int
    d: int
    rows: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.rows, dtype=np.float64).reshape(self.n, self.d)
        if not np.all(np.isfinite(arr)):
            raise ValueError("feature values must be finite")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "rows", arr)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "FeatureMatrix":
        arr = np.asarray(arr, dtype=np.float64)
        n, d = arr.shape
        return cls(n=n, d=d, rows=arr)


@dataclass(frozen=True)
class GaussianStats:
    """Sample mean vector and covariance matrix of a feature set."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64).reshape(-1)
        sig = np.asarray(self.sigma, dtype=np.float64)
        d = mu.shape[0]
        if sig.shape != (d, d):
            raise ValueError("covariance shape must match mean dimension")
        if np.abs(sig - sig.T).max() > 1e-10:
            raise ValueError("covariance must be symmetric")
        mu = mu.copy()
        sig = sig.copy()
        mu.setflags(write=False)
        sig.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sig)

    @property
    def d(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class MetricBands:
    """Ordered band boundaries for FID and SSIM classification."""

    fid_edges: tuple = (10.0, 30.0, 50.0)
    ssim_edges: tuple = (0.5, 0.7, 0.9)

    def __post_init__(self):
        for edges in (self.fid_edges, self.ssim_edges):
            if len(edges) != 3 or not all(
                a < b for a, b in zip(edges, edges[1:])
            ):
                raise ValueError("band edges must be strictly increasing")


@dataclass(frozen=True)
class SimilarityReport:
    """All metric values plus per-metric and overall risk classification."""

    ssim: float
    fid: float
    psnr: float  # may be +inf
    mask_iou: float
    ssim_band: str
    fid_band: str
    overall_risk: str
    config_digest: str


def _window_weights() -> np.ndarray:
    offsets = np.arange(SSIM_WINDOW, dtype=np.float64) - (SSIM_WINDOW - 1) / 2
    w = np.exp(-(offsets**2) / (2.0 * SSIM_WINDOW_SIGMA**2))
    return w / w.sum()


_W1D = _window_weights()


def _valid_filter(arr: np.ndarray) -> np.ndarray:
    """Separable Gaussian-window average over valid window positions."""
    k = SSIM_WINDOW
    h, w = arr.shape
    out = np.zeros((h, w - k + 1))
    for i, wi in enumerate(_W1D):
        out += wi * arr[:, i : i + w - k + 1]
    out2 = np.zeros((h - k + 1, w - k + 1))
    for i, wi in enumerate(_W1D):
        out2 += wi * out[i : i + h - k + 1, :]
    return out2


def ssim(a: ImageBuffer, b: ImageBuffer) -> float:
    """Mean SSIM over 11x11 Gaussian windows on luminance, valid positions only."""
    require_same_dims(a, b)
    if a.width < SSIM_WINDOW or a.height < SSIM_WINDOW:
        raise ImageTooSmall(
            f"need at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {a.width}x{a.height}"
        )
    x = to_grayscale(a).data[:, :, 0]
    y = to_grayscale(b).data[:, :, 0]

    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2

    mu_x = _valid_filter(x)
    mu_y = _valid_filter(y)
    xx = _valid_filter(x * x) - mu_x * mu_x
    yy = _valid_filter(y * y) - mu_y * mu_y
    xy = _valid_filter(x * y) - mu_x * mu_y

    num = (2.0 * mu_x * mu_y + c1) * (2.0 * xy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
    return float(np.mean(num / den))


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    require_same_dims(a, b, channels=True)
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(DYNAMIC_RANGE**2 / mse)


def extract_patch_features(
    img: ImageBuffer, patch: int, stride: int
) -> FeatureMatrix:
    """Per-patch statistics: (mean, std, |∇x| mean, |∇y| mean) per channel.

    Patches tile the image at the given stride; d = 4 * channels.
    """
    if patch > min(img.width, img.height):
        raise ImageTooSmall(
            f"patch {patch} exceeds image {img.width}x{img.height}"
        )
    if patch < 2 or stride < 1:
        raise ValueError("patch must be >= 2 and stride >= 1")
    data = img.data
    # windows: (ny, nx, channels, patch, patch)
    win = np.lib.stride_tricks.sliding_window_view(data, (patch, patch), axis=(0, 1))
    win = win[::stride, ::stride]
    mean = win.mean(axis=(-2, -1))
    std = win.std(axis=(-2, -1))
    gh = np.abs(np.diff(win, axis=-1)).mean(axis=(-2, -1))
    gv = np.abs(np.diff(win, axis=-2)).mean(axis=(-2, -1))
    # per patch: channel-major blocks of (mean, std, |∇x|, |∇y|)
    feats = np.stack([mean, std, gh, gv], axis=-1)  # (ny, nx, c, 4)
    rows = feats.reshape(feats.shape[0] * feats.shape[1], img.channels * 4)
    return FeatureMatrix.from_array(rows)


def estimate_stats(f: FeatureMatrix) -> GaussianStats:
    """Column means and unbiased covariance, regularized by ε·I."""
    if f.n < 2:
        raise InsufficientSamples(f"need >= 2 samples, got {f.n}")
    mu = f.rows.mean(axis=0)
    centered = f.rows - mu
    sigma = centered.T @ centered / (f.n - 1)
    sigma = (sigma + sigma.T) / 2.0
    sigma += COV_EPSILON * np.eye(f.d)
    return GaussianStats(mu=mu, sigma=sigma)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric square root with negative eigenvalues clamped to zero."""
    try:
        vals, vecs = np.linalg.eigh(m)
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(f"eigendecomposition failed: {e}") from None
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(p: GaussianStats, q: GaussianStats) -> float:
    """‖μ1-μ2‖² + Tr(Σ1 + Σ2 - 2(Σ1Σ2)^½), clamped to be non-negative.

    Tr((Σ1Σ2)^½) is evaluated as Σ√λ over the eigenvalues of the symmetric
    product Σ1^½ Σ2 Σ1^½.
    """
    if p.d != q.d:
        raise DimensionMismatch(f"feature dims {p.d} vs {q.d}")
    diff = p.mu - q.mu
    s1_half = _psd_sqrt(p.sigma)
    inner = s1_half @ q.sigma @ s1_half
    inner = (inner + inner.T) / 2.0
    try:
        vals = np.linalg.eigvalsh(inner)
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(f"eigendecomposition failed: {e}") from None
    tr_sqrt = float(np.sqrt(np.clip(vals, 0.0, None)).sum())
    dist = float(diff @ diff + np.trace(p.sigma) + np.trace(q.sigma) - 2.0 * tr_sqrt)
    return max(0.0, dist)


def fid_images(
    a: ImageBuffer, b: ImageBuffer, patch: int = 16, stride: int = 8
) -> float:
    """Fréchet distance between the patch-feature distributions of two images."""
    sa = estimate_stats(extract_patch_features(a, patch, stride))
    sb = estimate_stats(extract_patch_features(b, patch, stride))
    return frechet_distance(sa, sb)


def classify(
    ssim_value: float, fid_value: float, bands: MetricBands = MetricBands()
) -> tuple[str, str, str]:
    """Map metric values to similarity bands and an overall risk label.

    Overall risk takes the more severe (more similar) of the two bands.
    """
    if not (-1.0 <= ssim_value <= 1.0):
        raise OutOfRange(f"ssim {ssim_value} outside [-1, 1]")
    if fid_value < 0.0:
        raise OutOfRange(f"fid {fid_value} must be >= 0")

    e0, e1, e2 = bands.fid_edges
    if fid_value < e0:
        fid_sev = 3
    elif fid_value <= e1:
        fid_sev = 2
    elif fid_value <= e2:
        fid_sev = 1
    else:
        fid_sev = 0

    s0, s1, s2 = bands.ssim_edges
    if ssim_value >= s2:
        ssim_sev = 3
    elif ssim_value >= s1:
        ssim_sev = 2
    elif ssim_value >= s0:
        ssim_sev = 1
    else:
        ssim_sev = 0

    overall = max(ssim_sev, fid_sev)
    return SSIM_BANDS[ssim_sev], FID_BANDS[fid_sev], RISK_LABELS[overall]
