"""Reconstruction losses shared by the training stages."""

from __future__ import annotations

import torch
import torch.nn as nn

from .common import freeze, seeded_init


class PerceptualLoss(nn.Module):
    """Feature-space L2 distance under a frozen convolutional stack.

    The backbone is pluggable; the default is a randomly-initialized stack
    with a recorded seed, which is what the toy scale uses. The distance sums
    squared feature differences over multiple depths.
    """

    def __init__(self, seed: int = 101, channels: tuple[int, ...] = (16, 32, 64)):
        super().__init__()
        self.seed = seed
        layers = []
        prev = 3
        for ch in channels:
            layers.append(nn.Conv2d(prev, ch, 3, stride=2, padding=1))
            prev = ch
        self.convs = nn.ModuleList(layers)
        self.act = nn.SiLU()
        seeded_init(self, seed)
        freeze(self)

    def features(self, x: torch.Tensor) -> list[torch.Tensor]:
        feats = []
        h = x
        for conv in self.convs:
            h = self.act(conv(h))
            feats.append(h)
        return feats

    def forward(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        fa, fb = self.features(a), self.features(b)
        return sum(torch.mean((x - y) ** 2) for x, y in zip(fa, fb))


def l1_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    return torch.mean(torch.abs(a - b))
