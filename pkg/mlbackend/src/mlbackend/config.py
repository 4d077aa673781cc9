"""Adapter configuration."""

from __future__ import annotations

from dataclasses import dataclass

SEGMENTATION_DEFAULT = "torchvision/maskrcnn_resnet50_fpn"


@dataclass(frozen=True)
class AdapterConfig:
    """Which models to serve and where.

    Model identifiers are configuration, not code: segmentation accepts
    "torchvision/maskrcnn_resnet50_fpn" with an optional ":untrained"
    suffix (random weights, offline testing); generation takes a diffusers
    pipeline id, or empty to disable /generate.
    """

    segmentation_model_id: str = SEGMENTATION_DEFAULT
    generation_model_id: str = ""
    device: str = "cpu"
    port: int = 8700
    score_threshold: float = 0.05
    # shrink the detector's internal resize for fast CPU smoke tests
    segmentation_min_size: int | None = None

    def __post_init__(self):
        if not (1024 <= self.port <= 65535):
            raise ValueError(f"port {self.port} outside [1024, 65535]")
        if not (0.0 <= self.score_threshold <= 1.0):
            raise ValueError("score_threshold must be in [0, 1]")
