"""Mask-aware learned skip connections between autoencoder encoder and decoder.

Each module transforms one intermediate encoder feature map of the masked
(agnostic) image and gates the result with the inverted resized inpainting
mask, so only content outside the repaint region percolates to the decoder.
The transformed feature is added to the decoder feature at the matching
depth. Output convolutions start at zero, making an untrained stack an exact
no-op on the decoder.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from ..errors import ContractError

VARIANTS = ("none", "linear", "nonlinear")


def resize_mask(mask: torch.Tensor, target: tuple[int, int]) -> torch.Tensor:
    """Nearest-neighbor downsample of a binary mask to `target` = (h, w).

    Uses the top-left index map out[y, x] = M[floor(y*H/h), floor(x*W/w)],
    which preserves strict binarity. Upsampling is not supported.
    """
    H, W = mask.shape[-2], mask.shape[-1]
    h, w = target
    if h > H or w > W:
        raise ContractError(f"resize_mask cannot upsample {H}×{W} to {h}×{w}")
    if not torch.all((mask == 0) | (mask == 1)):
        raise ContractError("mask must be strictly binary")
    idx_y = torch.div(torch.arange(h, device=mask.device) * H, h, rounding_mode="floor")
    idx_x = torch.div(torch.arange(w, device=mask.device) * W, w, rounding_mode="floor")
    out = mask.index_select(-2, idx_y).index_select(-1, idx_x)
    return out


class EmascModule(nn.Module):
    """One learned skip connection at a single tap depth.

    nonlinear: 3×3 conv (channel-preserving) → SiLU → 3×3 conv to the decoder
    channel count; linear: a single channel-mapping 3×3 conv, no nonlinearity.
    All convs stride 1, padding 1. The output conv is zero-initialized.
    """

    def __init__(self, in_channels: int, out_channels: int, variant: str = "nonlinear",
                 masked: bool = True):
        super().__init__()
        if variant not in ("linear", "nonlinear"):
            raise ContractError(f"variant must be linear or nonlinear, got {variant!r}")
        self.variant = variant
        self.masked = masked
        self.in_channels = in_channels
        self.out_channels = out_channels
        if variant == "nonlinear":
            self.conv1 = nn.Conv2d(in_channels, in_channels, 3, stride=1, padding=1)
            self.act = nn.SiLU()
        self.conv_out = nn.Conv2d(in_channels, out_channels, 3, stride=1, padding=1)
        nn.init.zeros_(self.conv_out.weight)
        nn.init.zeros_(self.conv_out.bias)

    def transform(self, feature: torch.Tensor) -> torch.Tensor:
        if self.variant == "nonlinear":
            feature = self.act(self.conv1(feature))
        return self.conv_out(feature)

    def forward(self, feature: torch.Tensor, mask_i: torch.Tensor | None = None) -> torch.Tensor:
        out = self.transform(feature)
        if self.masked:
            if mask_i is None:
                raise ContractError("masked module requires the resized mask")
            if mask_i.shape[-2:] != out.shape[-2:]:
                raise ContractError(
                    f"resized mask {tuple(mask_i.shape[-2:])} does not match "
                    f"feature {tuple(out.shape[-2:])}"
                )
            out = out * (1.0 - mask_i)
        return out


def emasc_forward(module: EmascModule, feature: torch.Tensor,
                  mask_i: torch.Tensor | None) -> torch.Tensor:
    """Apply one skip module: transformed feature gated by the inverted mask."""
    return module(feature, mask_i)


def build_emasc_modules(tap_channels, decoder_channels, variant: str = "nonlinear",
                        masked: bool = True) -> nn.ModuleList:
    if variant == "none":
        return nn.ModuleList()
    if len(tap_channels) != len(decoder_channels):
        raise ContractError("one module per tap point is required")
    return nn.ModuleList(
        EmascModule(c_in, c_out, variant=variant, masked=masked)
        for c_in, c_out in zip(tap_channels, decoder_channels)
    )
