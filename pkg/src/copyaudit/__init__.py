"""copyaudit: mask-guided generation audit pipeline with similarity metrics."""

from .imagecore import ImageBuffer, decode_png, encode_png, to_grayscale
from .maskops import BinaryMask, SoftMask, mask_iou, threshold_mask, upsample_mask
from .blur import GaussianKernel, build_kernel, gaussian_blur
from .metrics import (
    FeatureMatrix,
    GaussianStats,
    MetricBands,
    SimilarityReport,
    classify,
    estimate_stats,
    extract_patch_features,
    fid_images,
    frechet_distance,
    psnr,
    ssim,
)
from .backends import BackendEndpoint, GenerationRequest
from .pipeline import AuditRecord, PipelineConfig, run_audit, run_batch

__version__ = "0.1.0"
