"""Time- and text-conditional denoiser with an extensible input convolution.

A compact two-level encoder-decoder with one cross-attention block per level.
The first convolution accepts either the 9-channel inpainting input or the
31-channel try-on input; a pretrained 9-channel model is grown to 31 channels
by zero-extending the input kernel, which leaves its function on the original
channels untouched.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ContractError
from .conditioning import ConditioningBundle, SpatialInput, apply_spatial_dropout

ARCH = {
    "toy": dict(base=32, d_cond=32, heads=4),
    "full": dict(base=128, d_cond=64, heads=8),
}


def sinusoidal_embedding(t: torch.Tensor, dim: int, dtype=torch.float32) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=dtype) / half)
    args = t.to(dtype).unsqueeze(-1) * freqs
    return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)


class TimeResBlock(nn.Module):
    def __init__(self, ch_in: int, ch_out: int, t_dim: int):
        super().__init__()
        self.conv1 = nn.Conv2d(ch_in, ch_out, 3, padding=1)
        self.conv2 = nn.Conv2d(ch_out, ch_out, 3, padding=1)
        self.t_proj = nn.Linear(t_dim, ch_out)
        self.skip = nn.Conv2d(ch_in, ch_out, 1) if ch_in != ch_out else nn.Identity()
        self.act = nn.SiLU()

    def forward(self, x, t_emb):
        h = self.conv1(self.act(x))
        h = h + self.t_proj(t_emb)[:, :, None, None]
        h = self.conv2(self.act(h))
        return self.skip(x) + h


class CrossAttentionBlock(nn.Module):
    def __init__(self, ch: int, d_cond: int, heads: int):
        super().__init__()
        self.norm = nn.GroupNorm(4, ch)
        self.attn = nn.MultiheadAttention(
            ch, heads, kdim=d_cond, vdim=d_cond, batch_first=True
        )

    def forward(self, x, context):
        B, C, H, W = x.shape
        q = self.norm(x).flatten(2).transpose(1, 2)
        out, _ = self.attn(q, context, context, need_weights=False)
        return x + out.transpose(1, 2).reshape(B, C, H, W)


class TryOnDenoiser(nn.Module):
    def __init__(self, in_channels: int = 9, scale: str = "toy"):
        super().__init__()
        arch = ARCH[scale]
        base, d_cond, heads = arch["base"], arch["d_cond"], arch["heads"]
        self.in_channels = in_channels
        self.base = base
        self.d_cond = d_cond
        t_dim = base * 4

        self.conv_in = nn.Conv2d(in_channels, base, 3, padding=1)
        self.time_mlp = nn.Sequential(
            nn.Linear(base, t_dim), nn.SiLU(), nn.Linear(t_dim, t_dim)
        )
        self.res_down = TimeResBlock(base, base, t_dim)
        self.attn_down = CrossAttentionBlock(base, d_cond, heads)
        self.down = nn.Conv2d(base, base * 2, 3, stride=2, padding=1)
        self.res_mid1 = TimeResBlock(base * 2, base * 2, t_dim)
        self.attn_mid = CrossAttentionBlock(base * 2, d_cond, heads)
        self.res_mid2 = TimeResBlock(base * 2, base * 2, t_dim)
        self.up_conv = nn.Conv2d(base * 2, base, 3, padding=1)
        self.fuse = nn.Conv2d(base * 2, base, 3, padding=1)
        self.res_up = TimeResBlock(base, base, t_dim)
        self.attn_up = CrossAttentionBlock(base, d_cond, heads)
        self.act = nn.SiLU()
        self.conv_out = nn.Conv2d(base, 4, 3, padding=1)
        nn.init.zeros_(self.conv_out.weight)
        nn.init.zeros_(self.conv_out.bias)

    def forward(self, x: torch.Tensor, t: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        if x.shape[1] != self.in_channels:
            raise ContractError(
                f"denoiser expects {self.in_channels} input channels, got {x.shape[1]}"
            )
        t_emb = self.time_mlp(sinusoidal_embedding(t, self.base, self.conv_in.weight.dtype))
        h0 = self.conv_in(x)
        h0 = self.res_down(h0, t_emb)
        h0 = self.attn_down(h0, context)
        h = self.down(h0)
        h = self.res_mid1(h, t_emb)
        h = self.attn_mid(h, context)
        h = self.res_mid2(h, t_emb)
        h = self.up_conv(F.interpolate(h, size=h0.shape[-2:], mode="nearest"))
        h = self.fuse(torch.cat([h, h0], dim=1))
        h = self.res_up(h, t_emb)
        h = self.attn_up(h, context)
        return self.conv_out(self.act(h))


def extend_input_conv(kernel: torch.Tensor, new_in: int) -> torch.Tensor:
    """Zero-extend a pretrained out×c_in×k×k input kernel to `new_in` channels.

    The original weights occupy the first c_in input slices; the added slices
    are exactly zero, so outputs are unchanged for any content of the new
    channels.
    """
    if kernel.dim() != 4:
        raise ContractError(f"expected out×in×k×k kernel, got {tuple(kernel.shape)}")
    c_in = kernel.shape[1]
    if new_in <= c_in:
        raise ContractError(f"new_in={new_in} must exceed existing {c_in} channels")
    extended = kernel.new_zeros((kernel.shape[0], new_in, kernel.shape[2], kernel.shape[3]))
    extended[:, :c_in] = kernel
    return extended


def extend_denoiser_input(denoiser: TryOnDenoiser, new_in: int) -> TryOnDenoiser:
    """Grow the denoiser's first convolution in place; weights are preserved."""
    old = denoiser.conv_in
    new_conv = nn.Conv2d(new_in, old.out_channels, old.kernel_size[0],
                         padding=old.padding[0])
    with torch.no_grad():
        new_conv.weight.copy_(extend_input_conv(old.weight, new_in))
        new_conv.bias.copy_(old.bias)
    denoiser.conv_in = new_conv
    denoiser.in_channels = new_in
    return denoiser


def predict_noise(
    denoiser: TryOnDenoiser,
    gamma: SpatialInput,
    psi: ConditioningBundle,
) -> torch.Tensor:
    """Deterministic noise estimate for one spatial input and conditioning."""
    gamma = apply_spatial_dropout(gamma, psi)
    x = gamma.data
    squeeze = x.dim() == 3
    if squeeze:
        x = x.unsqueeze(0)
    if x.shape[1] != denoiser.in_channels:
        raise ContractError(
            f"spatial input has {x.shape[1]} channels, denoiser expects {denoiser.in_channels}"
        )
    text = psi.resolved_text()
    if text.dim() == 2:
        text = text.unsqueeze(0)
    if text.shape[0] != x.shape[0]:
        text = text.expand(x.shape[0], -1, -1)
    t = psi.timestep
    if not torch.is_tensor(t):
        t = torch.tensor([int(t)] * x.shape[0])
    was_training = denoiser.training
    denoiser.eval()
    with torch.no_grad():
        eps = denoiser(x, t, text)
    if was_training:
        denoiser.train()
    return eps.squeeze(0) if squeeze else eps
