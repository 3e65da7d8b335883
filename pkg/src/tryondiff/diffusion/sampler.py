"""Deterministic guided reverse-diffusion sampling.

A deterministic (eta = 0) solver walks an evenly spaced timestep subsequence
from a seeded Gaussian start latent. Each step evaluates the denoiser on a
fully-conditioned branch and, when the guidance scale differs from 1, on a
fully-null branch (null text, zeroed pose and warped-garment channels); the
two estimates are combined by classifier-free guidance. Cost per step is two
denoiser evaluations regardless of how many conditions are active (one when
s = 1 short-circuits the arithmetic).
"""

from __future__ import annotations

import torch

from ..common import make_generator
from ..errors import ContractError
from .conditioning import ConditioningBundle, assemble_spatial_input, cfg_combine
from .denoiser import TryOnDenoiser, predict_noise
from .schedule import ScheduleTable


def timestep_subsequence(T: int, steps: int) -> list[int]:
    """Evenly spaced descending timesteps covering [0, T-1]."""
    if steps == 1:
        return [T - 1]
    span = torch.linspace(0, T - 1, steps)
    return sorted({int(round(float(v))) for v in span}, reverse=True)


def sample(
    denoiser: TryOnDenoiser,
    sched: ScheduleTable,
    fixed: dict,
    text_cond: torch.Tensor,
    null_text: torch.Tensor,
    steps: int,
    guidance: float,
    seed: int,
) -> torch.Tensor:
    """Run the reverse trajectory and return the final latent estimate.

    `fixed` holds the per-request spatial conditioning: mask, enc_agnostic,
    and (for the 31-channel model) pose and enc_warped.
    """
    if steps > sched.T:
        raise ContractError(f"steps={steps} exceeds schedule length T={sched.T}")
    if steps < 1:
        raise ContractError("steps must be >= 1")

    mask = fixed["mask"]
    enc_agnostic = fixed["enc_agnostic"]
    pose = fixed.get("pose")
    enc_warped = fixed.get("enc_warped")

    g = make_generator(seed)
    z = torch.randn(enc_agnostic.shape, generator=g)

    ts = timestep_subsequence(sched.T, steps)
    for i, t in enumerate(ts):
        gamma = assemble_spatial_input(z, mask, enc_agnostic, pose, enc_warped)
        psi_cond = ConditioningBundle(text=text_cond, timestep=t, null_text=null_text)
        eps_cond = predict_noise(denoiser, gamma, psi_cond)
        if guidance == 1.0:
            eps = eps_cond
        else:
            psi_null = ConditioningBundle(
                text=null_text,
                timestep=t,
                drop_text=False,
                drop_warp=pose is not None,
                drop_pose=pose is not None,
            )
            eps_uncond = predict_noise(denoiser, gamma, psi_null)
            eps = cfg_combine(eps_cond, eps_uncond, guidance)

        abar_t = sched.alpha_bar[t]
        abar_prev = sched.alpha_bar[ts[i + 1]] if i + 1 < len(ts) else torch.tensor(1.0)
        x0 = (z - torch.sqrt(1.0 - abar_t) * eps) / torch.sqrt(abar_t)
        z = torch.sqrt(abar_prev) * x0 + torch.sqrt(1.0 - abar_prev) * eps

    return z
