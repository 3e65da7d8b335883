"""Latent autoencoder backbone with tap points for the learned skip connections.

The encoder compresses 3×H×W images to 4×(H/8)×(W/8) latents through three
downsampling stages and exposes intermediate features at declared tap points:
the input convolution output and the feature entering each deeper
downsampling block. The decoder mirrors the encoder and can receive additive
skip terms at the matching depths.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from ..errors import ContractError
from .emasc import EmascModule, emasc_forward, resize_mask

LATENT_CHANNELS = 4

ARCH = {
    "toy": dict(channels=(16, 32, 64, 64)),
    "full": dict(channels=(32, 64, 128, 128)),
}


@dataclass
class EncoderTaps:
    """Intermediate encoder features, shallowest first (spatial dims decreasing)."""

    features: list[torch.Tensor]
    tap_ids: tuple[str, ...]


class ResBlock(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(8, ch)
        self.conv1 = nn.Conv2d(ch, ch, 3, padding=1)
        self.norm2 = nn.GroupNorm(8, ch)
        self.conv2 = nn.Conv2d(ch, ch, 3, padding=1)
        self.act = nn.SiLU()

    def forward(self, x):
        h = self.conv1(self.act(self.norm1(x)))
        h = self.conv2(self.act(self.norm2(h)))
        return x + h


class LatentEncoder(nn.Module):
    TAP_IDS = ("conv_in", "pre_down_2", "pre_down_3")

    def __init__(self, channels=(16, 32, 64, 64)):
        super().__init__()
        c0, c1, c2, c3 = channels
        self.channels = tuple(channels)
        self.conv_in = nn.Conv2d(3, c0, 3, padding=1)
        self.down1 = nn.Conv2d(c0, c1, 3, stride=2, padding=1)
        self.block1 = ResBlock(c1)
        self.down2 = nn.Conv2d(c1, c2, 3, stride=2, padding=1)
        self.block2 = ResBlock(c2)
        self.down3 = nn.Conv2d(c2, c3, 3, stride=2, padding=1)
        self.block3 = ResBlock(c3)
        self.act = nn.SiLU()
        self.conv_moments = nn.Conv2d(c3, 2 * LATENT_CHANNELS, 3, padding=1)
        # Start the posterior narrow (std ~ 0.05): wide init noise swamps the
        # color code early in training and the decoder learns washed-out means.
        with torch.no_grad():
            self.conv_moments.bias[LATENT_CHANNELS:].fill_(-6.0)

    @property
    def tap_channels(self) -> tuple[int, ...]:
        c0, c1, c2, _ = self.channels
        return (c0, c1, c2)

    def forward(self, x: torch.Tensor):
        t0 = self.conv_in(x)
        h = self.block1(self.down1(self.act(t0)))
        t1 = h
        h = self.block2(self.down2(h))
        t2 = h
        h = self.block3(self.down3(h))
        moments = self.conv_moments(self.act(h))
        mean, logvar = moments.chunk(2, dim=1)
        return mean, logvar.clamp(-30.0, 20.0), [t0, t1, t2]


class LatentDecoder(nn.Module):
    def __init__(self, channels=(16, 32, 64, 64)):
        super().__init__()
        c0, c1, c2, c3 = channels
        self.channels = tuple(channels)
        self.conv_in = nn.Conv2d(LATENT_CHANNELS, c3, 3, padding=1)
        self.block3 = ResBlock(c3)
        self.up3 = nn.Conv2d(c3, c2, 3, padding=1)
        self.block2 = ResBlock(c2)
        self.up2 = nn.Conv2d(c2, c1, 3, padding=1)
        self.block1 = ResBlock(c1)
        self.up1 = nn.Conv2d(c1, c0, 3, padding=1)
        self.block0 = ResBlock(c0)
        self.act = nn.SiLU()
        self.conv_out = nn.Conv2d(c0, 3, 3, padding=1)

    @property
    def stage_channels(self) -> tuple[int, ...]:
        """Decoder feature channels at the tap depths, shallowest first."""
        c0, c1, c2, _ = self.channels
        return (c0, c1, c2)

    @staticmethod
    def _up(x):
        return torch.nn.functional.interpolate(x, scale_factor=2, mode="nearest")

    def forward(self, z: torch.Tensor, skip_terms: list[torch.Tensor] | None = None):
        # skip_terms are ordered shallowest-first to match the encoder taps.
        h = self.block3(self.conv_in(z))
        h = self.up3(self._up(h))
        if skip_terms is not None:
            h = h + skip_terms[2]
        h = self.block2(h)
        h = self.up2(self._up(h))
        if skip_terms is not None:
            h = h + skip_terms[1]
        h = self.block1(h)
        h = self.up1(self._up(h))
        if skip_terms is not None:
            h = h + skip_terms[0]
        h = self.block0(h)
        # No squashing nonlinearity: targets sit at the range limits (black
        # garment background is exactly -1) and tanh saturation kills their
        # gradients. decode() clamps at the public boundary.
        return self.conv_out(self.act(h))


class LatentAutoencoder(nn.Module):
    """Paired encoder/decoder plus the latent scaling used by the denoiser."""

    def __init__(self, scale: str = "toy"):
        super().__init__()
        channels = ARCH[scale]["channels"]
        self.scale = scale
        self.encoder = LatentEncoder(channels)
        self.decoder = LatentDecoder(channels)
        self.register_buffer("latent_scale", torch.tensor(1.0))

    @property
    def tap_ids(self) -> tuple[str, ...]:
        return LatentEncoder.TAP_IDS


def _as_batch(t: torch.Tensor) -> tuple[torch.Tensor, bool]:
    if t.dim() == 3:
        return t.unsqueeze(0), True
    if t.dim() == 4:
        return t, False
    raise ContractError(f"expected 3D or 4D tensor, got {t.dim()}D")


def encode(
    auto: LatentAutoencoder,
    image: torch.Tensor,
    want_taps: bool = False,
    deterministic: bool = True,
    seed: int | None = None,
):
    """Encode an image to a 4×(H/8)×(W/8) latent, optionally returning taps.

    Deterministic mode returns the posterior mean; sampling mode draws from
    the posterior with a caller-supplied seed.
    """
    x, squeeze = _as_batch(image)
    if x.shape[-2] % 8 or x.shape[-1] % 8:
        raise ContractError(f"image dims {tuple(x.shape[-2:])} not divisible by 8")
    mean, logvar, taps = auto.encoder(x)
    if deterministic:
        z = mean
    else:
        if seed is None:
            raise ContractError("sampling mode requires an explicit seed")
        g = torch.Generator().manual_seed(int(seed))
        noise = torch.randn(mean.shape, generator=g, dtype=mean.dtype)
        z = mean + torch.exp(0.5 * logvar) * noise
    if squeeze:
        z = z.squeeze(0)
        taps = [t.squeeze(0) for t in taps]
    if want_taps:
        return z, EncoderTaps(features=taps, tap_ids=auto.tap_ids)
    return z, None


def decode(auto: LatentAutoencoder, z: torch.Tensor) -> torch.Tensor:
    """Decode a latent to a 3×H×W image clamped to [-1, 1]."""
    zb, squeeze = _as_batch(z)
    if zb.shape[1] != LATENT_CHANNELS:
        raise ContractError(f"latent must have {LATENT_CHANNELS} channels, got {zb.shape[1]}")
    out = auto.decoder(zb).clamp(-1.0, 1.0)
    return out.squeeze(0) if squeeze else out


def decode_with_emasc(
    auto: LatentAutoencoder,
    z: torch.Tensor,
    taps: EncoderTaps,
    mask: torch.Tensor,
    modules: nn.ModuleList,
) -> torch.Tensor:
    """Decode with additive mask-gated skip terms from the agnostic-image taps."""
    zb, squeeze = _as_batch(z)
    if zb.shape[1] != LATENT_CHANNELS:
        raise ContractError(f"latent must have {LATENT_CHANNELS} channels, got {zb.shape[1]}")
    feats = [f.unsqueeze(0) if f.dim() == 3 else f for f in taps.features]
    if len(modules) != len(feats):
        raise ContractError(
            f"{len(feats)} tap points but {len(modules)} skip modules"
        )
    m = mask.unsqueeze(0) if mask.dim() == 3 else mask
    terms = []
    for module, feat in zip(modules, feats):
        m_i = resize_mask(m, (feat.shape[-2], feat.shape[-1])) if module.masked else None
        terms.append(emasc_forward(module, feat, m_i))
    out = auto.decoder(zb, skip_terms=terms).clamp(-1.0, 1.0)
    return out.squeeze(0) if squeeze else out
