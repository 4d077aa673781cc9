"""Audit orchestrator: mask extraction, conditioned generation, blur,
metrics, and risk classification, for single images and batches."""

from __future__ import annotations

import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import backends, blur, imagecore, maskops, metrics
from .backends import BackendEndpoint, GenerationRequest
from .errors import CopyAuditError, ManifestError, PipelineError
from .imagecore import ImageBuffer
from .metrics import MetricBands, SimilarityReport

MOCK = "mock"


@dataclass(frozen=True)
class PipelineConfig:
    """All pipeline tunables; hashes to a canonical config digest."""

    blur_sigma: float = 1.0
    blur_radius: int | None = None  # None = ceil(3 * sigma)
    mask_threshold: float = 0.5
    ssim_window: int = 11  # fixed; SSIM implementation assumes it
    fid_patch: int = 16
    fid_stride: int = 8
    seed: int = 0
    steps: int = 30
    seg_endpoint: BackendEndpoint | str = MOCK
    gen_endpoint: BackendEndpoint | str = MOCK
    avoid_mask: bool = True
    target_resolution: int = 512

    def __post_init__(self):
        if self.blur_sigma <= 0:
            raise ValueError("blur_sigma must be > 0")
        if self.blur_radius is not None and self.blur_radius < 1:
            raise ValueError("blur_radius must be >= 1")
        if not (0.0 <= self.mask_threshold <= 1.0):
            raise ValueError("mask_threshold must be in [0, 1]")
        if self.ssim_window != 11:
            raise ValueError("ssim_window is fixed at 11")
        if self.fid_patch < 2 or self.fid_stride < 1:
            raise ValueError("invalid fid patch/stride")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.target_resolution < 16:
            raise ValueError("target_resolution must be >= 16")

    def effective_blur_radius(self) -> int:
        if self.blur_radius is not None:
            return self.blur_radius
        return blur.default_radius(self.blur_sigma)

    def to_dict(self) -> dict:
        def ep(e):
            if isinstance(e, str):
                return e
            return {
                "base_url": e.base_url,
                "timeout": e.timeout,
                "retries": e.retries,
                "backoff": e.backoff,
            }

        return {
            "blur_sigma": self.blur_sigma,
            "blur_radius": self.blur_radius,
            "mask_threshold": self.mask_threshold,
            "ssim_window": self.ssim_window,
            "fid_patch": self.fid_patch,
            "fid_stride": self.fid_stride,
            "seed": self.seed,
            "steps": self.steps,
            "seg_endpoint": ep(self.seg_endpoint),
            "gen_endpoint": ep(self.gen_endpoint),
            "avoid_mask": self.avoid_mask,
            "target_resolution": self.target_resolution,
        }

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        def ep(v):
            if isinstance(v, dict):
                return BackendEndpoint(**v)
            return v

        kwargs = dict(d)
        for key in ("seg_endpoint", "gen_endpoint"):
            if key in kwargs:
                kwargs[key] = ep(kwargs[key])
        return cls(**kwargs)


@dataclass
class AuditRecord:
    """Outcome of one audit; report is present iff all stages succeeded."""

    source_path: str
    prompt: str
    report: SimilarityReport | None = None
    mask_path: str | None = None
    generated_path: str | None = None
    blurred_path: str | None = None
    timing_ms: dict = field(default_factory=dict)
    error_stage: str | None = None
    error_message: str | None = None

    def to_dict(self, include_timing: bool = True) -> dict:
        """Serialize to the report JSON schema (stable key order)."""
        out: dict = {"source": self.source_path, "prompt": self.prompt}
        if self.report is not None:
            r = self.report
            out["metrics"] = {
                "ssim": r.ssim,
                "fid": r.fid,
                "psnr": "inf" if math.isinf(r.psnr) else r.psnr,
                "mask_iou": r.mask_iou,
            }
            out["bands"] = {
                "ssim": r.ssim_band,
                "fid": r.fid_band,
                "overall_risk": r.overall_risk,
            }
            out["outputs"] = {
                "mask": self.mask_path,
                "generated": self.generated_path,
                "blurred": self.blurred_path,
            }
            out["config_digest"] = r.config_digest
        else:
            out["error"] = {
                "stage": self.error_stage,
                "message": self.error_message,
            }
        if include_timing:
            out["timing_ms"] = self.timing_ms
        return out


class _Timer:
    def __init__(self, record: AuditRecord, stage: str):
        self.record = record
        self.stage = stage

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.record.timing_ms[self.stage] = round(
            (time.perf_counter() - self.start) * 1000.0, 3
        )
        return False


def _target_dims(img: ImageBuffer, target: int) -> tuple[int, int]:
    scale = target / max(img.width, img.height)
    return max(1, round(img.width * scale)), max(1, round(img.height * scale))


def segment_stage(cfg: PipelineConfig, img: ImageBuffer) -> maskops.SoftMask:
    if cfg.seg_endpoint == MOCK:
        return backends.mock_segment(img)
    return backends.segment(cfg.seg_endpoint, img)


def _generate(cfg: PipelineConfig, req: GenerationRequest, dims) -> ImageBuffer:
    if cfg.gen_endpoint == MOCK:
        return backends.mock_generate(req, dims)
    return backends.generate(cfg.gen_endpoint, req)


def run_audit(
    cfg: PipelineConfig,
    source: ImageBuffer,
    prompt: str,
    out_dir: str | Path = "audit_out",
    source_path: str = "",
) -> AuditRecord:
    """Run the full audit pipeline on one image.

    Stage order: resize, segment + refine mask, conditioned generation,
    Gaussian blur, metrics, classification. Intermediate images persist to
    out_dir as they are produced; on failure the partial files remain.
    """
    record = AuditRecord(source_path=source_path, prompt=prompt)
    if not prompt:
        record.error_stage = "validate"
        record.error_message = "prompt must be non-empty"
        return record

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(source_path).stem if source_path else "audit"

    stage = "resize"
    try:
        with _Timer(record, stage):
            tw, th = _target_dims(source, cfg.target_resolution)
            resized = imagecore.resize_image(source, tw, th)

        stage = "segment"
        with _Timer(record, stage):
            soft = segment_stage(cfg, resized)
            mask = maskops.threshold_mask(soft, cfg.mask_threshold)
            mask = maskops.largest_component_mask(mask)
            mask = maskops.upsample_mask(mask, resized.width, resized.height)
            mask_path = out_dir / f"{stem}_mask.png"
            mask_path.write_bytes(maskops.mask_to_png(mask))
            record.mask_path = str(mask_path)

        stage = "generate"
        with _Timer(record, stage):
            req = GenerationRequest(
                prompt=prompt,
                mask=mask,
                seed=cfg.seed,
                steps=cfg.steps,
                avoid_mask=cfg.avoid_mask,
            )
            generated = _generate(cfg, req, (resized.width, resized.height))
            gen_path = out_dir / f"{stem}_generated.png"
            gen_path.write_bytes(imagecore.encode_png(generated))
            record.generated_path = str(gen_path)

        stage = "blur"
        with _Timer(record, stage):
            kernel = blur.build_kernel(cfg.blur_sigma, cfg.effective_blur_radius())
            blurred = blur.gaussian_blur(generated, kernel)
            blur_path = out_dir / f"{stem}_blurred.png"
            blur_path.write_bytes(imagecore.encode_png(blurred))
            record.blurred_path = str(blur_path)

        stage = "metrics"
        with _Timer(record, stage):
            ma, mb = resized, blurred
            if ma.channels != mb.channels:
                ma = imagecore.to_grayscale(ma)
                mb = imagecore.to_grayscale(mb)
            ssim_value = metrics.ssim(ma, mb)
            psnr_value = metrics.psnr(ma, mb)
            fid_value = metrics.fid_images(ma, mb, cfg.fid_patch, cfg.fid_stride)
            out_soft = maskops.fallback_segment(blurred)
            out_mask = maskops.threshold_mask(out_soft, cfg.mask_threshold)
            iou = maskops.mask_iou(mask, out_mask)

        stage = "classify"
        with _Timer(record, stage):
            ssim_band, fid_band, overall = metrics.classify(
                ssim_value, fid_value, MetricBands()
            )
            record.report = SimilarityReport(
                ssim=ssim_value,
                fid=fid_value,
                psnr=psnr_value,
                mask_iou=iou,
                ssim_band=ssim_band,
                fid_band=fid_band,
                overall_risk=overall,
                config_digest=cfg.digest(),
            )
    except CopyAuditError as e:
        record.error_stage = stage
        record.error_message = str(e)
    except (OSError, ValueError) as e:
        record.error_stage = stage
        record.error_message = str(e)
    return record


def load_manifest(path: str | Path) -> list[tuple[str, str]]:
    """Read a manifest: JSON array of {"path": ..., "prompt": ...}."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
        items = json.loads(raw)
        if not isinstance(items, list) or not items:
            raise ValueError("manifest must be a non-empty JSON array")
        out = []
        for item in items:
            out.append((str(item["path"]), str(item["prompt"])))
        return out
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise ManifestError(f"cannot read manifest {path}: {e}") from None


def audit_file(cfg: PipelineConfig, path: str, prompt: str, out_dir) -> AuditRecord:
    try:
        source = imagecore.decode_png(Path(path).read_bytes())
    except (OSError, CopyAuditError) as e:
        record = AuditRecord(source_path=path, prompt=prompt)
        record.error_stage = "load"
        record.error_message = str(e)
        return record
    return run_audit(cfg, source, prompt, out_dir=out_dir, source_path=path)


def run_batch(
    cfg: PipelineConfig,
    manifest: list[tuple[str, str]],
    out_dir: str | Path = "audit_out",
    workers: int | None = None,
) -> list[AuditRecord]:
    """Audit every manifest item; results come back in manifest order.

    Per-item failures are recorded in their AuditRecord and never abort the
    batch. Items share no mutable state, so any worker count yields the same
    records.
    """
    if not manifest:
        raise ManifestError("manifest is empty")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(audit_file, cfg, path, prompt, out_dir)
            for path, prompt in manifest
        ]
        return [f.result() for f in futures]
