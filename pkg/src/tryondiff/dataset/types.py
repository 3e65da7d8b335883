"""Core sample types and tensor contract checks.

Images are float32 3×H×W in [-1, 1] with H, W divisible by 8; inpainting
masks are float32 1×H×W strictly in {0, 1} (1 = repaint); pose maps are
float32 18×H×W heatmaps in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import torch

from ..errors import ContractError

NUM_KEYPOINTS = 18

CATEGORIES = ("upper", "lower", "dress")


class SegLabel(IntEnum):
    """Segmentation label map values shared by all dataset layouts."""

    BACKGROUND = 0
    HEAD = 1
    TORSO = 2
    ARMS = 3
    LEGS = 4
    UPPER_GARMENT = 5
    LOWER_GARMENT = 6
    DRESS = 7


GARMENT_LABEL = {
    "upper": SegLabel.UPPER_GARMENT,
    "lower": SegLabel.LOWER_GARMENT,
    "dress": SegLabel.DRESS,
}

# Body parts adjacent to each category that the inpainting mask must absorb.
ADJACENT_LABELS = {
    "upper": (SegLabel.ARMS,),
    "lower": (SegLabel.LEGS,),
    "dress": (SegLabel.ARMS, SegLabel.LEGS),
}


def check_image(t: torch.Tensor, name: str = "image") -> torch.Tensor:
    if t.dim() != 3 or t.shape[0] != 3:
        raise ContractError(f"{name}: expected 3×H×W tensor, got {tuple(t.shape)}")
    if t.shape[1] % 8 != 0 or t.shape[2] % 8 != 0:
        raise ContractError(
            f"{name}: H and W must be divisible by 8, got {tuple(t.shape[1:])}"
        )
    if t.min() < -1.0 - 1e-6 or t.max() > 1.0 + 1e-6:
        raise ContractError(f"{name}: values outside [-1, 1]")
    return t


def check_mask(t: torch.Tensor, name: str = "mask") -> torch.Tensor:
    if t.dim() != 3 or t.shape[0] != 1:
        raise ContractError(f"{name}: expected 1×H×W tensor, got {tuple(t.shape)}")
    if not torch.all((t == 0) | (t == 1)):
        raise ContractError(f"{name}: mask must be strictly binary")
    return t


def check_pose(t: torch.Tensor, name: str = "pose") -> torch.Tensor:
    if t.dim() != 3 or t.shape[0] != NUM_KEYPOINTS:
        raise ContractError(
            f"{name}: expected {NUM_KEYPOINTS}×H×W tensor, got {tuple(t.shape)}"
        )
    if t.min() < 0.0 or t.max() > 1.0 + 1e-6:
        raise ContractError(f"{name}: values outside [0, 1]")
    return t


@dataclass
class TryOnSample:
    """One try-on instance: model image, garment, mask, pose, agnostic image."""

    model_image: torch.Tensor
    garment: torch.Tensor
    mask: torch.Tensor
    pose: torch.Tensor
    agnostic: torch.Tensor
    category: str
    pairing: str                      # paired | unpaired
    record_id: str = ""
    garment_id: str = ""
    warped_garment: Optional[torch.Tensor] = None
    segmentation: Optional[torch.Tensor] = None   # int64 H×W label map
    keypoints: Optional[torch.Tensor] = None      # float32 18×3 (x, y, vis)

    def validate(self) -> "TryOnSample":
        check_image(self.model_image, "model_image")
        check_image(self.garment, "garment")
        check_mask(self.mask, "mask")
        check_pose(self.pose, "pose")
        check_image(self.agnostic, "agnostic")
        if self.category not in CATEGORIES:
            raise ContractError(f"unknown category {self.category!r}")
        if self.pairing not in ("paired", "unpaired"):
            raise ContractError(f"unknown pairing {self.pairing!r}")
        if self.warped_garment is not None:
            check_image(self.warped_garment, "warped_garment")
        return self
