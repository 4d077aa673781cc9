"""Model wrappers: instance segmentation and mask-conditioned generation."""

from __future__ import annotations

import logging

import numpy as np
import torch

from .config import AdapterConfig

logger = logging.getLogger(__name__)


def select_instance(
    scores: np.ndarray, masks: np.ndarray, mode: str = "score"
) -> int | None:
    """Pick which detected instance feeds the conditioning mask.

    mode "score": highest confidence; mode "largest": biggest soft-mask area.
    Returns None when there are no instances.
    """
    if len(scores) == 0:
        return None
    if mode == "largest":
        areas = masks.reshape(len(masks), -1).sum(axis=1)
        return int(np.argmax(areas))
    return int(np.argmax(scores))


class SegmentationModel:
    """Torchvision Mask R-CNN behind a numpy in/out interface."""

    def __init__(self, cfg: AdapterConfig):
        self.cfg = cfg
        self.model = self._build(cfg)
        self.model.eval()
        self.device = torch.device(cfg.device)
        self.model.to(self.device)

    @staticmethod
    def _build(cfg: AdapterConfig):
        from torchvision.models.detection import (
            MaskRCNN_ResNet50_FPN_Weights,
            maskrcnn_resnet50_fpn,
        )

        model_id, _, variant = cfg.segmentation_model_id.partition(":")
        if model_id != "torchvision/maskrcnn_resnet50_fpn":
            raise ValueError(f"unknown segmentation model: {model_id}")
        kwargs = {}
        if cfg.segmentation_min_size is not None:
            kwargs["min_size"] = cfg.segmentation_min_size
            kwargs["max_size"] = 2 * cfg.segmentation_min_size
        if variant == "untrained":
            return maskrcnn_resnet50_fpn(
                weights=None, weights_backbone=None, num_classes=91, **kwargs
            )
        return maskrcnn_resnet50_fpn(
            weights=MaskRCNN_ResNet50_FPN_Weights.DEFAULT, **kwargs
        )

    @torch.no_grad()
    def soft_mask(self, image: np.ndarray, select: str = "score") -> np.ndarray:
        """(H, W, 3) float image -> (H, W) float soft mask in [0, 1].

        All-zero mask when nothing is detected above the score threshold.
        """
        tensor = torch.from_numpy(image.transpose(2, 0, 1)).to(self.device)
        out = self.model([tensor])[0]
        scores = out["scores"].cpu().numpy()
        keep = scores >= self.cfg.score_threshold
        h, w = image.shape[:2]
        if not keep.any():
            return np.zeros((h, w), dtype=np.float32)
        masks = out["masks"][keep, 0].cpu().numpy()
        idx = select_instance(scores[keep], masks, select)
        return np.clip(masks[idx], 0.0, 1.0)


class GenerationModel:
    """ControlNet + Stable Diffusion via diffusers; optional at runtime."""

    def __init__(self, cfg: AdapterConfig):
        # deferred import: diffusers is an extra and may be absent
        from diffusers import (
            ControlNetModel,
            StableDiffusionControlNetPipeline,
        )

        model_id = cfg.generation_model_id
        controlnet_id = "lllyasviel/sd-controlnet-seg"
        if "|" in model_id:
            model_id, controlnet_id = model_id.split("|", 1)
        controlnet = ControlNetModel.from_pretrained(controlnet_id)
        self.pipe = StableDiffusionControlNetPipeline.from_pretrained(
            model_id, controlnet=controlnet, safety_checker=None
        )
        self.pipe.to(cfg.device)
        self.device = cfg.device

    def generate(
        self,
        prompt: str,
        mask: np.ndarray,
        seed: int,
        steps: int,
        avoid_mask: bool,
    ) -> np.ndarray:
        """Boolean mask -> (H, W, 3) float image at the mask's dimensions."""
        from PIL import Image

        # conditioning polarity: with avoid_mask the complement is the
        # region the model is steered to occupy
        cond = ~mask if avoid_mask else mask
        cond_img = Image.fromarray((cond * 255).astype(np.uint8)).convert("RGB")
        generator = torch.Generator(device=self.device).manual_seed(seed)
        result = self.pipe(
            prompt,
            image=cond_img,
            num_inference_steps=steps,
            generator=generator,
        ).images[0]
        h, w = mask.shape
        result = result.resize((w, h))
        return np.asarray(result, dtype=np.float32) / 255.0
