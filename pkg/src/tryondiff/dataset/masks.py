"""Inpainting mask construction and the cloth-agnostic person image."""

from __future__ import annotations

import torch

from ..errors import ContractError, EmptyGarmentError
from .types import ADJACENT_LABELS, GARMENT_LABEL, check_image, check_mask

AGNOSTIC_FILL = 0.0  # mid-gray in [-1, 1]


def build_inpaint_mask(segmentation: torch.Tensor, category: str, margin: int = 8) -> torch.Tensor:
    """Build the inpainting mask for `category` from a label map.

    The mask is the union of the garment segmentation, its bounding box
    dilated by `margin` pixels, and the adjacent body parts (arms for
    upper/dress, legs for lower), guaranteeing it fully covers the target
    garment while staying cloth agnostic.
    """
    if segmentation.dim() != 2:
        raise ContractError(f"segmentation must be H×W, got {tuple(segmentation.shape)}")
    if category not in GARMENT_LABEL:
        raise ContractError(f"unknown category {category!r}")
    seg = segmentation.long()
    H, W = seg.shape

    garment = seg == int(GARMENT_LABEL[category])
    if not garment.any():
        raise EmptyGarmentError(
            f"segmentation has no pixels with label {GARMENT_LABEL[category].name}"
        )

    mask = garment.clone()
    ys, xs = torch.nonzero(garment, as_tuple=True)
    y0 = max(int(ys.min()) - margin, 0)
    y1 = min(int(ys.max()) + margin, H - 1)
    x0 = max(int(xs.min()) - margin, 0)
    x1 = min(int(xs.max()) + margin, W - 1)
    mask[y0 : y1 + 1, x0 : x1 + 1] = True

    for label in ADJACENT_LABELS[category]:
        mask |= seg == int(label)

    return mask.unsqueeze(0).float()


def make_agnostic(image: torch.Tensor, mask: torch.Tensor, fill: float = AGNOSTIC_FILL) -> torch.Tensor:
    """Zero out (to `fill`) the masked region of the model image."""
    check_image(image)
    check_mask(mask)
    if image.shape[1:] != mask.shape[1:]:
        raise ContractError(
            f"image {tuple(image.shape[1:])} and mask {tuple(mask.shape[1:])} disagree"
        )
    return image * (1.0 - mask) + fill * mask
