"""Adapter training against a frozen inpainting denoiser."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..common import make_generator
from ..config import AdapterConfig
from ..diffusion.schedule import ScheduleTable, add_noise
from ..diffusion.training import (
    _freeze_guard,
    _freeze_verify,
    _latent_mask,
    _stack,
    encode_scaled,
)
from ..errors import ContractError
from ..optim import TrainLog, make_adamw, warmup_scheduler
from .adapter import InversionAdapter, category_prompt


def train_adapter(
    adapter: InversionAdapter,
    denoiser,
    auto,
    text_enc,
    vis_enc,
    samples,
    sched: ScheduleTable,
    cfg: AdapterConfig,
    steps: int | None = None,
    lr: float | None = None,
    seed: int = 0,
    log: TrainLog | None = None,
) -> InversionAdapter:
    """Learn garment-feature pseudo embeddings that help the frozen 9-channel
    inpainting denoiser predict the added noise; everything except the adapter
    is frozen and hash-verified."""
    if denoiser.in_channels != 9:
        raise ContractError("adapter training runs against the 9-channel inpainting model")
    frozen = {
        "denoiser": denoiser,
        "autoencoder": auto,
        "text_encoder": text_enc,
        "visual_encoder": vis_enc,
    }
    hashes = _freeze_guard(frozen)

    steps = cfg.steps if steps is None else steps
    lr = cfg.lr if lr is None else lr
    opt = make_adamw(adapter.parameters(), lr=lr, weight_decay=cfg.weight_decay)
    sched_lr = warmup_scheduler(opt, cfg.warmup)

    g = make_generator(seed)
    n = len(samples)
    adapter.train()
    for step in range(steps):
        idx = torch.randint(0, n, (cfg.batch,), generator=g)
        group = [samples[i] for i in idx.tolist()]
        B = len(group)
        images = _stack(group, "model_image")
        garments = _stack(group, "garment")
        masks = _stack(group, "mask")
        agnostic = _stack(group, "agnostic")

        z0 = encode_scaled(auto, images)
        e_ag = encode_scaled(auto, agnostic)
        m = _latent_mask(masks)
        t = torch.randint(0, sched.T, (B,), generator=g)
        eps = torch.randn(z0.shape, generator=g)
        z_t = add_noise(z0, eps, t, sched)
        gamma = torch.cat([z_t, m, e_ag], dim=1)

        ptes = adapter(vis_enc.encode_tokens(garments))
        v_q = torch.stack([
            text_enc.embed_tokens(
                text_enc.tokenize(category_prompt(cfg.prompt_template, s.category))
            )
            for s in group
        ])
        ctx = text_enc.encode_embeddings(torch.cat([v_q, ptes], dim=1))

        loss = F.mse_loss(denoiser(gamma, t, ctx), eps)
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched_lr.step()
        if log is not None:
            log.write(step + 1, loss.item(), opt.param_groups[0]["lr"])

    _freeze_verify(frozen, hashes)
    adapter.eval()
    return adapter
