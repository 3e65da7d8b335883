"""Perceptual patch similarity with a pluggable feature backbone."""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..errors import TryonError
from ..losses import PerceptualLoss

_BACKBONES: dict[str, object] = {}


def register_lpips_backbone(identifier: str, factory) -> None:
    _BACKBONES[identifier] = factory


def resolve_lpips_backbone(backbone):
    if isinstance(backbone, str):
        factory = _BACKBONES.get(backbone)
        if factory is None:
            raise TryonError(f"no LPIPS backbone registered as {backbone!r}")
        return factory()
    return backbone


# Default toy backbone: the recorded-seed frozen stack.
register_lpips_backbone("toy-lpips-64", lambda: PerceptualLoss(seed=313, channels=(16, 32, 64)))


def lpips(a: torch.Tensor, b: torch.Tensor, backbone="toy-lpips-64") -> float:
    """Sum over layers of spatially-averaged squared differences between
    channel-unit-normalized features (uniform channel weights)."""
    net = resolve_lpips_backbone(backbone)
    squeeze = a.dim() == 3
    x = a.unsqueeze(0) if squeeze else a
    y = b.unsqueeze(0) if squeeze else b
    with torch.no_grad():
        fx = net.features(x)
        fy = net.features(y)
    total = 0.0
    for u, v in zip(fx, fy):
        un = F.normalize(u, dim=1, eps=1e-10)
        vn = F.normalize(v, dim=1, eps=1e-10)
        # Mean over channels = uniform 1/C weighting; mean over space.
        total += float(((un - vn) ** 2).mean(dim=(2, 3)).mean())
    return total
