"""Visual and text encoder interfaces plus the seeded toy implementations.

Encoders are referenced by identifier and resolved through a registry, so the
full-scale pretrained vision-language stack can be bound externally without
touching the adapter code. The toy encoders are small frozen networks whose
weights are a pure function of a recorded seed.
"""

from __future__ import annotations

import re

import torch
import torch.nn as nn

from ..common import freeze, seeded_init
from ..errors import CheckpointError, ContractError

# 64-word toy vocabulary; index 0 is <unk>, index 1 is <bos>.
TOY_VOCAB = (
    "<unk> <bos> a an the of photo image picture model person woman man "
    "wearing wears dressed top shirt blouse sweater jacket trousers pants "
    "skirt shorts jeans dress gown garment cloth clothing item piece striped "
    "plain patterned red green blue yellow black white gray bright dark "
    "light color colored new shop front view body upper lower full collar "
    "sleeve fabric soft warm casual summer winter"
).split()
assert len(TOY_VOCAB) == 64


class ToyVisualEncoder(nn.Module):
    """Patchify + one transformer layer; exposes last-hidden-layer tokens."""

    identifier = "toy-vis-32"

    def __init__(self, token_dim: int = 32, patch: int = 8, seed: int = 211):
        super().__init__()
        self.token_dim = token_dim
        self.patch = patch
        self.proj = nn.Conv2d(3, token_dim, patch, stride=patch)
        self.layer = nn.TransformerEncoderLayer(
            token_dim, nhead=4, dim_feedforward=2 * token_dim, batch_first=True
        )
        self.norm = nn.LayerNorm(token_dim)
        seeded_init(self, seed)
        freeze(self)

    def encode_tokens(self, image: torch.Tensor) -> torch.Tensor:
        squeeze = image.dim() == 3
        x = image.unsqueeze(0) if squeeze else image
        with torch.no_grad():
            tokens = self.proj(x).flatten(2).transpose(1, 2)
            tokens = self.norm(self.layer(tokens))
        return tokens.squeeze(0) if squeeze else tokens


class ToyTextEncoder(nn.Module):
    """Tokenizer, embedding lookup, and a 2-layer transformer text encoder."""

    identifier = "toy-text-32"

    def __init__(self, token_dim: int = 32, max_len: int = 77, seed: int = 223):
        super().__init__()
        self.token_dim = token_dim
        self.cond_dim = token_dim
        self.max_len = max_len
        self.vocab = {w: i for i, w in enumerate(TOY_VOCAB)}
        self.embedding = nn.Embedding(len(TOY_VOCAB), token_dim)
        self.pos = nn.Parameter(torch.zeros(max_len, token_dim))
        self.layers = nn.ModuleList(
            nn.TransformerEncoderLayer(
                token_dim, nhead=4, dim_feedforward=2 * token_dim, batch_first=True
            )
            for _ in range(2)
        )
        self.norm = nn.LayerNorm(token_dim)
        seeded_init(self, seed)
        freeze(self)

    def tokenize(self, prompt: str) -> list[int]:
        words = re.findall(r"[a-z0-9]+", prompt.lower())
        return [self.vocab["<bos>"]] + [self.vocab.get(w, 0) for w in words]

    def embed_tokens(self, ids: list[int]) -> torch.Tensor:
        with torch.no_grad():
            return self.embedding(torch.tensor(ids, dtype=torch.long))

    def encode_embeddings(self, embeddings: torch.Tensor) -> torch.Tensor:
        """Run the transformer over a (L×d) or (B×L×d) embedding sequence."""
        squeeze = embeddings.dim() == 2
        x = embeddings.unsqueeze(0) if squeeze else embeddings
        L = x.shape[1]
        if L > self.max_len:
            raise ContractError(
                f"sequence length {L} exceeds text encoder maximum {self.max_len}"
            )
        h = x + self.pos[:L]
        for layer in self.layers:
            h = layer(h)
        h = self.norm(h)
        return h.squeeze(0) if squeeze else h


def _full_scale_stub(identifier: str):
    def factory():
        raise CheckpointError(
            f"encoder {identifier!r} is a full-scale pretrained checkpoint; bind it "
            "externally by registering a loader with register_encoder()"
        )

    return factory


_REGISTRY = {
    "toy-vis-32": ToyVisualEncoder,
    "toy-text-32": ToyTextEncoder,
    "openclip-vit-h14": _full_scale_stub("openclip-vit-h14"),
    "clip-text-large": _full_scale_stub("clip-text-large"),
}


def register_encoder(identifier: str, factory) -> None:
    _REGISTRY[identifier] = factory


def resolve_encoder(identifier: str):
    try:
        factory = _REGISTRY[identifier]
    except KeyError:
        raise CheckpointError(f"unknown encoder identifier {identifier!r}")
    return factory()
