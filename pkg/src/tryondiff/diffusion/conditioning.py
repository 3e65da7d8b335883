"""Spatial input assembly, condition dropout, and guidance arithmetic.

The denoiser's convolutional input concatenates, in fixed order, the noisy
latent (4), the resized binary mask (1), the encoded agnostic image (4), the
resized pose map (18), and the encoded warped garment (4): 31 channels. The
adapter-training pipeline uses only the first 9.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import torch

from ..errors import ContractError

CHANNEL_LAYOUT_FULL = (
    ("z_t", 0, 4),
    ("mask", 4, 5),
    ("agnostic_latent", 5, 9),
    ("pose", 9, 27),
    ("warped_latent", 27, 31),
)
CHANNEL_LAYOUT_INPAINT = CHANNEL_LAYOUT_FULL[:3]


@dataclass
class SpatialInput:
    data: torch.Tensor
    layout: tuple = CHANNEL_LAYOUT_FULL

    @property
    def channels(self) -> int:
        return self.data.shape[-3]

    def slice(self, name: str) -> torch.Tensor:
        for n, a, b in self.layout:
            if n == name:
                return self.data[..., a:b, :, :]
        raise ContractError(f"no channel slice named {name!r}")


@dataclass
class ConditioningBundle:
    """Cross-attention text sequence, timestep, and per-condition dropout flags."""

    text: torch.Tensor                      # (L+N)×d or batched
    timestep: int | torch.Tensor = 0
    drop_text: bool = False
    drop_warp: bool = False
    drop_pose: bool = False
    null_text: torch.Tensor | None = field(default=None, repr=False)

    def resolved_text(self) -> torch.Tensor:
        if self.drop_text:
            if self.null_text is None:
                raise ContractError("text dropped but no null conditioning provided")
            return self.null_text
        return self.text


def assemble_spatial_input(
    z_t: torch.Tensor,
    mask: torch.Tensor,
    enc_agnostic: torch.Tensor,
    pose: torch.Tensor | None = None,
    enc_warped: torch.Tensor | None = None,
) -> SpatialInput:
    """Concatenate the denoiser input channels in their fixed order.

    Omitting both `pose` and `enc_warped` yields the 9-channel inpainting
    input used while training the inversion adapter.
    """
    parts = [("z_t", z_t, 4), ("mask", mask, 1), ("agnostic_latent", enc_agnostic, 4)]
    if (pose is None) != (enc_warped is None):
        raise ContractError("pose and warped-garment channels must be given together")
    full = pose is not None
    if full:
        parts += [("pose", pose, 18), ("warped_latent", enc_warped, 4)]

    ref = z_t.shape[-2:]
    for name, t, ch in parts:
        if t.shape[-3] != ch:
            raise ContractError(f"{name}: expected {ch} channels, got {t.shape[-3]}")
        if t.shape[-2:] != ref:
            raise ContractError(f"{name}: spatial dims {tuple(t.shape[-2:])} != {tuple(ref)}")
        if t.dim() != z_t.dim():
            raise ContractError(f"{name}: rank mismatch with z_t")
    if not torch.all((mask == 0) | (mask == 1)):
        raise ContractError("mask channel must be strictly binary")

    data = torch.cat([t for _, t, _ in parts], dim=-3)
    return SpatialInput(data=data, layout=CHANNEL_LAYOUT_FULL if full else CHANNEL_LAYOUT_INPAINT)


def condition_dropout(
    bundle: ConditioningBundle,
    p: float,
    rng: torch.Generator,
) -> ConditioningBundle:
    """Independently drop each of {text, warped garment, pose} with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ContractError(f"dropout probability {p} outside [0, 1]")
    draws = torch.rand(3, generator=rng)
    return replace(
        bundle,
        drop_text=bool(draws[0] < p) or bundle.drop_text,
        drop_warp=bool(draws[1] < p) or bundle.drop_warp,
        drop_pose=bool(draws[2] < p) or bundle.drop_pose,
    )


def apply_spatial_dropout(spatial: SpatialInput, bundle: ConditioningBundle) -> SpatialInput:
    """Zero-fill the channels of dropped spatial conditions."""
    if not (bundle.drop_warp or bundle.drop_pose):
        return spatial
    data = spatial.data.clone()
    for name, a, b in spatial.layout:
        if name == "pose" and bundle.drop_pose:
            data[..., a:b, :, :] = 0.0
        if name == "warped_latent" and bundle.drop_warp:
            data[..., a:b, :, :] = 0.0
    return SpatialInput(data=data, layout=spatial.layout)


def cfg_combine(eps_cond: torch.Tensor, eps_uncond: torch.Tensor, s: float) -> torch.Tensor:
    """Classifier-free guidance: uncond + s * (cond - uncond).

    s = 1 and s = 0 return the respective branch exactly (no float residue).
    """
    if eps_cond.shape != eps_uncond.shape:
        raise ContractError("guidance branches must share shapes")
    if s == 1.0:
        return eps_cond
    if s == 0.0:
        return eps_uncond
    return eps_uncond + s * (eps_cond - eps_uncond)
