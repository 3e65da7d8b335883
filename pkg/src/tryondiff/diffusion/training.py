"""Denoiser training: toy inpainting pretraining and the try-on stage."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..autoencoder.backbone import LatentAutoencoder, encode
from ..autoencoder.emasc import resize_mask
from ..common import is_frozen, make_generator, weights_hash
from ..config import TryonConfig
from ..errors import ContractError, FrozenModuleError
from ..inversion.adapter import assemble_condition, category_prompt, null_condition
from ..optim import TrainLog, make_adamw, warmup_scheduler
from .conditioning import ConditioningBundle, condition_dropout
from .denoiser import TryOnDenoiser
from .schedule import ScheduleTable, add_noise

LATENT_FACTOR = 8


@torch.no_grad()
def encode_scaled(auto: LatentAutoencoder, images: torch.Tensor) -> torch.Tensor:
    """Posterior-mean latents scaled to unit-ish variance for the denoiser."""
    z, _ = encode(auto, images, deterministic=True)
    return z * auto.latent_scale


def pose_to_latent(pose: torch.Tensor) -> torch.Tensor:
    """Resize a pose map to latent resolution. Max pooling keeps each visible
    keypoint's peak at 1 instead of averaging it away."""
    squeeze = pose.dim() == 3
    p = pose.unsqueeze(0) if squeeze else pose
    out = F.max_pool2d(p, kernel_size=LATENT_FACTOR)
    return out.squeeze(0) if squeeze else out


def _stack(samples, attr):
    return torch.stack([getattr(s, attr) for s in samples])


def _latent_mask(masks: torch.Tensor) -> torch.Tensor:
    h, w = masks.shape[-2] // LATENT_FACTOR, masks.shape[-1] // LATENT_FACTOR
    return resize_mask(masks, (h, w))


def _freeze_guard(named_modules: dict) -> dict:
    hashes = {}
    for name, module in named_modules.items():
        if module is None:
            continue
        if not is_frozen(module):
            raise FrozenModuleError(f"{name} must be frozen during this stage")
        hashes[name] = weights_hash(module)
    return hashes


def _freeze_verify(named_modules: dict, hashes: dict) -> None:
    for name, before in hashes.items():
        if weights_hash(named_modules[name]) != before:
            raise FrozenModuleError(f"{name} drifted during training")


def pretrain_inpainting(
    denoiser: TryOnDenoiser,
    auto: LatentAutoencoder,
    text_enc,
    samples,
    sched: ScheduleTable,
    steps: int,
    lr: float,
    batch: int = 8,
    seed: int = 0,
    log: TrainLog | None = None,
) -> TryOnDenoiser:
    """Train the 9-channel inpainting denoiser with null text conditioning.

    This is the toy-scale stand-in for the pretrained inpainting model the
    adapter stage expects; at full scale a checkpoint is loaded instead.
    """
    if denoiser.in_channels != 9:
        raise ContractError("inpainting pretraining expects the 9-channel denoiser")
    hashes = _freeze_guard({"autoencoder": auto})
    null_ctx = null_condition(text_enc).encoded.detach()

    opt = torch.optim.Adam(denoiser.parameters(), lr=lr)
    g = make_generator(seed)
    denoiser.train()
    n = len(samples)
    for step in range(steps):
        idx = torch.randint(0, n, (batch,), generator=g)
        group = [samples[i] for i in idx.tolist()]
        images = _stack(group, "model_image")
        masks = _stack(group, "mask")
        agnostic = _stack(group, "agnostic")

        z0 = encode_scaled(auto, images)
        e_ag = encode_scaled(auto, agnostic)
        m = _latent_mask(masks)
        t = torch.randint(0, sched.T, (len(group),), generator=g)
        eps = torch.randn(z0.shape, generator=g)
        z_t = add_noise(z0, eps, t, sched)

        gamma = torch.cat([z_t, m, e_ag], dim=1)
        ctx = null_ctx.unsqueeze(0).expand(len(group), -1, -1)
        loss = F.mse_loss(denoiser(gamma, t, ctx), eps)
        opt.zero_grad()
        loss.backward()
        opt.step()
        if log is not None:
            log.write(step + 1, loss.item(), lr)

    _freeze_verify({"autoencoder": auto}, hashes)
    denoiser.eval()
    return denoiser


def train_tryon(
    denoiser: TryOnDenoiser,
    adapter,
    auto: LatentAutoencoder,
    warp_nets,
    text_enc,
    vis_enc,
    samples,
    sched: ScheduleTable,
    cfg: TryonConfig,
    prompt_template: str,
    emasc_modules=None,
    steps: int | None = None,
    lr: float | None = None,
    seed: int = 0,
    log: TrainLog | None = None,
    no_warp: bool = False,
    no_text: bool = False,
):
    """Joint try-on training: the extended denoiser and the inversion adapter
    learn together; autoencoder, skip modules, warping nets, and both encoders
    stay frozen (verified by hash). Conditions are randomly dropped with
    probability cfg.cond_dropout for classifier-free guidance at inference."""
    if denoiser.in_channels != 31:
        raise ContractError(
            f"try-on training expects the 31-channel denoiser, got {denoiser.in_channels}"
        )
    frozen = {
        "autoencoder": auto,
        "warping": warp_nets,
        "text_encoder": text_enc,
        "visual_encoder": vis_enc,
    }
    if emasc_modules is not None and len(emasc_modules) > 0:
        frozen["emasc"] = emasc_modules
    hashes = _freeze_guard(frozen)

    steps = cfg.steps if steps is None else steps
    lr = cfg.lr if lr is None else lr
    params = list(denoiser.parameters()) + list(adapter.parameters())
    opt = make_adamw(params, lr=lr, weight_decay=cfg.weight_decay)
    sched_lr = warmup_scheduler(opt, cfg.warmup)

    null_ctx = null_condition(text_enc).encoded.detach()
    g = make_generator(seed)
    n = len(samples)
    denoiser.train()
    adapter.train()
    for step in range(steps):
        idx = torch.randint(0, n, (cfg.batch,), generator=g)
        group = [samples[i] for i in idx.tolist()]
        B = len(group)
        images = _stack(group, "model_image")
        garments = _stack(group, "garment")
        masks = _stack(group, "mask")
        poses = _stack(group, "pose")
        agnostic = _stack(group, "agnostic")

        with torch.no_grad():
            z0 = encode_scaled(auto, images)
            e_ag = encode_scaled(auto, agnostic)
            if no_warp:
                e_cw = torch.zeros_like(e_ag)
            else:
                dst = warp_nets.target_points(garments, poses, agnostic)
                coarse = warp_nets.tps(garments, dst)
                warped = warp_nets.refiner(torch.cat([coarse, poses, agnostic], dim=1))
                e_cw = encode_scaled(auto, warped)
            m = _latent_mask(masks)
            p = pose_to_latent(poses)

        bundle = condition_dropout(
            ConditioningBundle(text=null_ctx, drop_text=no_text, drop_warp=no_warp),
            cfg.cond_dropout,
            g,
        )
        if bundle.drop_pose:
            p = torch.zeros_like(p)
        if bundle.drop_warp:
            e_cw = torch.zeros_like(e_cw)

        t = torch.randint(0, sched.T, (B,), generator=g)
        eps = torch.randn(z0.shape, generator=g)
        z_t = add_noise(z0, eps, t, sched)
        gamma = torch.cat([z_t, m, e_ag, p, e_cw], dim=1)

        if bundle.drop_text:
            ctx = null_ctx.unsqueeze(0).expand(B, -1, -1)
        else:
            tokens = vis_enc.encode_tokens(garments)
            ptes = adapter(tokens)
            # Category words are single tokens, so prompt lengths agree.
            v_q = torch.stack([
                text_enc.embed_tokens(
                    text_enc.tokenize(category_prompt(prompt_template, s.category))
                )
                for s in group
            ])
            seq = torch.cat([v_q, ptes], dim=1)
            ctx = text_enc.encode_embeddings(seq)

        loss = F.mse_loss(denoiser(gamma, t, ctx), eps)
        opt.zero_grad()
        loss.backward()
        opt.step()
        sched_lr.step()
        if log is not None:
            log.write(step + 1, loss.item(), opt.param_groups[0]["lr"])

    _freeze_verify(frozen, hashes)
    denoiser.eval()
    adapter.eval()
    return denoiser, adapter
