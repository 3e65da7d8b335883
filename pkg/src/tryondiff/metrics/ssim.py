"""Windowed structural similarity for [-1, 1] images."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..errors import ContractError

WINDOW = 11
SIGMA = 1.5
DATA_RANGE = 2.0
C1 = (0.01 * DATA_RANGE) ** 2
C2 = (0.03 * DATA_RANGE) ** 2


def _gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> torch.Tensor:
    coords = torch.arange(size, dtype=torch.float64) - (size - 1) / 2
    g = torch.exp(-(coords**2) / (2 * sigma**2))
    g = g / g.sum()
    return torch.outer(g, g)


@torch.no_grad()
def ssim(a: torch.Tensor, b: torch.Tensor) -> float:
    """Mean SSIM over 11×11 Gaussian windows (sigma 1.5) and channels.

    Inputs in [-1, 1] are shifted to [0, 2] before the computation; the
    stability constants use dynamic range R = 2 either way.
    """
    if a.shape != b.shape:
        raise ContractError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    squeeze = a.dim() == 3
    x = (a.unsqueeze(0) if squeeze else a).double() + 1.0
    y = (b.unsqueeze(0) if squeeze else b).double() + 1.0
    C = x.shape[1]
    win = _gaussian_window().expand(C, 1, WINDOW, WINDOW)

    def filt(t):
        return F.conv2d(t, win, groups=C)

    mu_x = filt(x)
    mu_y = filt(y)
    sigma_x = filt(x * x) - mu_x * mu_x
    sigma_y = filt(y * y) - mu_y * mu_y
    sigma_xy = filt(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + C1) * (2 * sigma_xy + C2)
    den = (mu_x * mu_x + mu_y * mu_y + C1) * (sigma_x + sigma_y + C2)
    return float((num / den).mean())
