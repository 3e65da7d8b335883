"""Feature extraction for the distribution metrics.

The extractor is pluggable: the toy scale uses a frozen seeded convolutional
stack with global average pooling; a full-scale inception-style extractor can
be registered under its own identifier.
"""

from __future__ import annotations

import numpy as np
import torch
import torch.nn as nn

from ..common import freeze, seeded_init
from ..errors import TryonError
from .fid import FeatureSet


class ToyFeatureExtractor(nn.Module):
    identifier = "toy-feat-64"

    def __init__(self, seed: int = 421, channels=(16, 32, 64)):
        super().__init__()
        layers = []
        prev = 3
        for ch in channels:
            layers += [nn.Conv2d(prev, ch, 3, stride=2, padding=1), nn.SiLU()]
            prev = ch
        self.net = nn.Sequential(*layers)
        self.out_dim = prev
        seeded_init(self, seed)
        freeze(self)

    @torch.no_grad()
    def extract(self, images) -> np.ndarray:
        """images: iterable of 3×H×W tensors → n×d feature matrix."""
        rows = []
        for img in images:
            x = img.unsqueeze(0) if img.dim() == 3 else img
            h = self.net(x)
            rows.append(h.mean(dim=(2, 3)).squeeze(0).numpy())
        return np.stack(rows)

    def feature_set(self, images) -> FeatureSet:
        return FeatureSet(self.extract(images), extractor_id=self.identifier)


_EXTRACTORS = {"toy-feat-64": ToyFeatureExtractor}


def register_extractor(identifier: str, factory) -> None:
    _EXTRACTORS[identifier] = factory


def resolve_extractor(extractor):
    if isinstance(extractor, str):
        factory = _EXTRACTORS.get(extractor)
        if factory is None:
            raise TryonError(f"no feature extractor registered as {extractor!r}")
        return factory()
    return extractor
