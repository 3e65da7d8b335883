"""Diffusion noise schedule shared by training and sampling."""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..errors import ContractError


@dataclass(frozen=True)
class ScheduleTable:
    kind: str
    beta: torch.Tensor        # (T,)
    alpha: torch.Tensor       # 1 - beta
    alpha_bar: torch.Tensor   # cumulative product of alpha

    @property
    def T(self) -> int:
        return int(self.beta.shape[0])

    def sqrt_alpha_bar(self, t):
        return torch.sqrt(self.alpha_bar[t])

    def sqrt_one_minus_alpha_bar(self, t):
        return torch.sqrt(1.0 - self.alpha_bar[t])


def build_schedule(T: int, kind: str = "scaled_linear") -> ScheduleTable:
    """Construct the beta/alpha tables. Deterministic in (T, kind)."""
    if T < 1:
        raise ContractError(f"schedule needs T >= 1, got {T}")
    beta_start, beta_end = 1e-4, 0.02
    if kind == "scaled_linear":
        beta = torch.linspace(0.00085**0.5, 0.012**0.5, T, dtype=torch.float64) ** 2
    elif kind == "linear":
        beta = torch.linspace(beta_start, beta_end, T, dtype=torch.float64)
    else:
        raise ContractError(f"unknown schedule kind {kind!r}")
    alpha = 1.0 - beta
    alpha_bar = torch.cumprod(alpha, dim=0)
    return ScheduleTable(
        kind=kind,
        beta=beta.to(torch.float32),
        alpha=alpha.to(torch.float32),
        alpha_bar=alpha_bar.to(torch.float32),
    )


def add_noise(z0: torch.Tensor, eps: torch.Tensor, t, sched: ScheduleTable) -> torch.Tensor:
    """Forward process: z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.

    `t` may be an int (applied to the whole tensor) or a per-sample integer
    tensor matching the batch dimension of a 4D input.
    """
    if isinstance(t, int):
        if not 0 <= t < sched.T:
            raise ContractError(f"t={t} outside [0, {sched.T})")
        a = sched.sqrt_alpha_bar(t)
        b = sched.sqrt_one_minus_alpha_bar(t)
        return a * z0 + b * eps
    t = torch.as_tensor(t, dtype=torch.long)
    if t.min() < 0 or t.max() >= sched.T:
        raise ContractError(f"timesteps outside [0, {sched.T})")
    shape = (-1,) + (1,) * (z0.dim() - 1)
    a = sched.sqrt_alpha_bar(t).reshape(shape)
    b = sched.sqrt_one_minus_alpha_bar(t).reshape(shape)
    return a * z0 + b * eps
