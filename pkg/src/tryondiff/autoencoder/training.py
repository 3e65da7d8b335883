"""Backbone pretraining (toy scale) and the skip-connection training loop."""

from __future__ import annotations

import torch

from ..common import freeze, is_frozen, make_generator, weights_hash
from ..config import EmascConfig
from ..errors import FrozenModuleError
from ..losses import PerceptualLoss, l1_loss
from ..optim import TrainLog, make_adamw, warmup_scheduler
from .backbone import LatentAutoencoder, decode, decode_with_emasc, encode
from .emasc import build_emasc_modules


def _stack(samples, attr):
    return torch.stack([getattr(s, attr) for s in samples])


def batch_iter(samples, batch_size: int, steps: int, seed: int):
    """Yield `steps` random batches drawn with an explicit generator."""
    g = make_generator(seed)
    n = len(samples)
    for _ in range(steps):
        idx = torch.randint(0, n, (batch_size,), generator=g)
        yield [samples[i] for i in idx.tolist()]


def backbone_image_pool(samples) -> list[torch.Tensor]:
    """Every image distribution the encoder must handle downstream: model
    images, agnostic images, in-shop garments, and worn-garment crops (the
    warped-garment style)."""
    from ..warping.training import garment_crop

    pool = []
    for s in samples:
        pool.append(s.model_image)
        pool.append(s.agnostic)
        pool.append(s.garment)
        if s.segmentation is not None:
            pool.append(garment_crop(s))
    return pool


def color_augment(images: torch.Tensor, g: torch.Generator) -> torch.Tensor:
    """Random channel permutation plus per-channel contraction toward a random
    offset. Keeps values inside [-1, 1]; teaches the autoencoder the full
    color cube instead of the sample palette."""
    B = images.shape[0]
    out = images.clone()
    for i in range(B):
        if torch.rand(1, generator=g).item() < 0.5:
            perm = torch.randperm(3, generator=g)
            out[i] = out[i][perm]
        s = 0.6 + 0.4 * torch.rand(3, 1, 1, generator=g)
        b = (1.0 - s) * (2.0 * torch.rand(3, 1, 1, generator=g) - 1.0)
        out[i] = out[i] * s + b
    return out


def pretrain_backbone(
    auto: LatentAutoencoder,
    samples,
    steps: int,
    lr: float,
    batch: int = 8,
    seed: int = 0,
    kl_weight: float = 1e-6,
    augment: bool = True,
    log: TrainLog | None = None,
) -> LatentAutoencoder:
    """Train encoder+decoder for reconstruction, then freeze and record the
    latent scaling used downstream by the diffusion stages."""
    pool = backbone_image_pool(samples)
    opt = torch.optim.Adam(auto.parameters(), lr=lr)
    auto.train()
    g_batch = make_generator(seed)
    for step in range(steps):
        idx = torch.randint(0, len(pool), (batch,), generator=g_batch)
        images = torch.stack([pool[i] for i in idx.tolist()])
        if augment:
            images = color_augment(images, g_batch)
        mean, logvar, _ = auto.encoder(images)
        g = make_generator(seed * 1_000_003 + step)
        z = mean + torch.exp(0.5 * logvar) * torch.randn(mean.shape, generator=g)
        recon = auto.decoder(z)
        kl = 0.5 * torch.mean(mean**2 + logvar.exp() - 1.0 - logvar)
        # L1 for sharpness, squared error to accelerate flat-color convergence.
        loss = l1_loss(recon, images) + torch.mean((recon - images) ** 2) + kl_weight * kl
        opt.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(auto.parameters(), 1.0)
        opt.step()
        if log is not None:
            log.write(step + 1, loss.item(), lr)

    freeze(auto)
    with torch.no_grad():
        probe = torch.stack(pool[: min(32, len(pool))])
        z, _ = encode(auto, probe, deterministic=True)
        std = z.std().clamp_min(1e-6)
        auto.latent_scale.fill_(float(1.0 / std))
    return auto


def train_emasc(
    auto: LatentAutoencoder,
    samples,
    cfg: EmascConfig,
    steps: int | None = None,
    seed: int = 0,
    lr: float | None = None,
    log: TrainLog | None = None,
    perceptual: PerceptualLoss | None = None,
    modules=None,
):
    """Train the skip modules against frozen encoder/decoder weights.

    Minimizes L1 + perceptual_weight × perceptual distance between the model
    image and its reconstruction decoded with agnostic-image taps. Aborts if
    the backbone is trainable; verifies by hash that it did not drift.
    Pass `modules` to continue training existing weights (resume).
    """
    if not is_frozen(auto):
        raise FrozenModuleError("autoencoder backbone must be frozen for EMASC training")
    backbone_hash = weights_hash(auto)

    if modules is None:
        modules = build_emasc_modules(
            auto.encoder.tap_channels,
            auto.decoder.stage_channels,
            variant=cfg.variant,
            masked=cfg.masked,
        )
    if len(modules) == 0:
        return modules, backbone_hash

    if perceptual is None:
        perceptual = PerceptualLoss()
    steps = cfg.steps if steps is None else steps
    lr = cfg.lr if lr is None else lr
    opt = make_adamw(modules.parameters(), lr=lr, weight_decay=cfg.weight_decay)
    sched = warmup_scheduler(opt, cfg.warmup)

    modules.train()
    for step, group in enumerate(batch_iter(samples, cfg.batch, steps, seed)):
        images = _stack(group, "model_image")
        agnostic = _stack(group, "agnostic")
        masks = _stack(group, "mask")
        with torch.no_grad():
            z, _ = encode(auto, images, deterministic=True)
            _, taps = encode(auto, agnostic, want_taps=True, deterministic=True)
        recon = decode_with_emasc(auto, z, taps, masks, modules)
        loss = l1_loss(recon, images) + cfg.perceptual_weight * perceptual(recon, images)
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched.step()
        if log is not None:
            log.write(step + 1, loss.item(), opt.param_groups[0]["lr"])

    if weights_hash(auto) != backbone_hash:
        raise FrozenModuleError("autoencoder backbone drifted during EMASC training")
    modules.eval()
    return modules, backbone_hash


@torch.no_grad()
def reconstruction_scores(auto, samples, modules=None, perceptual=None, batch: int = 8):
    """Held-out reconstruction L1 (and perceptual distance) with or without
    the skip modules; used by the ablation grid and acceptance checks."""
    if perceptual is None:
        perceptual = PerceptualLoss()
    l1_total, perc_total, n = 0.0, 0.0, 0
    for i in range(0, len(samples), batch):
        group = samples[i : i + batch]
        images = _stack(group, "model_image")
        agnostic = _stack(group, "agnostic")
        masks = _stack(group, "mask")
        z, _ = encode(auto, images, deterministic=True)
        if modules is not None and len(modules) > 0:
            _, taps = encode(auto, agnostic, want_taps=True, deterministic=True)
            recon = decode_with_emasc(auto, z, taps, masks, modules)
        else:
            recon = decode(auto, z)
        l1_total += float(torch.abs(recon - images).mean()) * len(group)
        perc_total += float(perceptual(recon, images)) * len(group)
        n += len(group)
    return l1_total / n, perc_total / n
