"""Forward-only textual inversion: garment features → pseudo-word embeddings.

The adapter maps last-hidden-layer visual tokens of the garment image to N
token embeddings in the text embedding space in a single forward pass (no
per-image optimization). The conditioning sequence concatenates the embedded
task prompt with the predicted embeddings, prompt first, and runs the text
encoder over the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from ..errors import ContractError

PROMPT_CATEGORY_WORDS = {"upper": "top", "lower": "trousers", "dress": "dress"}


def category_prompt(template: str, category: str) -> str:
    return f"{template} {PROMPT_CATEGORY_WORDS.get(category, category)}"


@dataclass
class ConditioningSequence:
    """Pre-encoding token-embedding sequence and its text-encoder output."""

    tokens: torch.Tensor    # (L+N)×d_token, prompt embeddings first
    encoded: torch.Tensor   # (L+N)×d_cond
    prompt: str
    prompt_length: int


class InversionAdapter(nn.Module):
    """Single transformer layer over visual tokens, then a 3-layer MLP head."""

    def __init__(self, visual_dim: int, token_dim: int, num_ptes: int = 16,
                 dropout: float = 0.1):
        super().__init__()
        self.visual_dim = visual_dim
        self.token_dim = token_dim
        self.num_ptes = num_ptes
        hidden = 4 * token_dim
        self.encoder_layer = nn.TransformerEncoderLayer(
            visual_dim, nhead=4, dim_feedforward=2 * visual_dim, batch_first=True
        )
        self.fc1 = nn.Linear(visual_dim, hidden)
        self.fc2 = nn.Linear(hidden, hidden)
        self.drop = nn.Dropout(dropout)
        self.fc3 = nn.Linear(hidden, num_ptes * token_dim)
        self.act = nn.GELU()
        nn.init.normal_(self.fc3.weight, std=0.02)
        nn.init.zeros_(self.fc3.bias)

    def forward(self, visual_tokens: torch.Tensor) -> torch.Tensor:
        squeeze = visual_tokens.dim() == 2
        x = visual_tokens.unsqueeze(0) if squeeze else visual_tokens
        if x.shape[-1] != self.visual_dim:
            raise ContractError(
                f"adapter expects visual width {self.visual_dim}, got {x.shape[-1]}"
            )
        h = self.encoder_layer(x).mean(dim=1)
        h = self.act(self.fc1(h))
        h = self.drop(self.act(self.fc2(h)))
        out = self.fc3(h).reshape(-1, self.num_ptes, self.token_dim)
        return out.squeeze(0) if squeeze else out


def predict_ptes(adapter: InversionAdapter, garment: torch.Tensor, encoder) -> torch.Tensor:
    """Predict the N×d_token embedding set for one garment image (inference)."""
    tokens = encoder.encode_tokens(garment)
    if tokens.shape[-1] != adapter.visual_dim:
        raise ContractError(
            f"visual encoder width {tokens.shape[-1]} does not match adapter "
            f"width {adapter.visual_dim}"
        )
    was_training = adapter.training
    adapter.eval()
    with torch.no_grad():
        ptes = adapter(tokens)
    if was_training:
        adapter.train()
    return ptes


def assemble_condition(prompt: str, ptes: torch.Tensor, text_stack) -> ConditioningSequence:
    """Build Concat(prompt embeddings, predicted embeddings) and encode it."""
    ids = text_stack.tokenize(prompt)
    L = len(ids)
    N = 0 if ptes is None else ptes.shape[0]
    if L + N > text_stack.max_len:
        raise ContractError(
            f"prompt tokens ({L}) plus embeddings ({N}) exceed the maximum "
            f"sequence length {text_stack.max_len}"
        )
    v_q = text_stack.embed_tokens(ids)
    tokens = v_q if N == 0 else torch.cat([v_q, ptes.to(v_q.dtype)], dim=0)
    encoded = text_stack.encode_embeddings(tokens)
    return ConditioningSequence(tokens=tokens, encoded=encoded, prompt=prompt, prompt_length=L)


_NULL_CACHE: dict[int, ConditioningSequence] = {}


def null_condition(text_stack) -> ConditioningSequence:
    """Encoding of the empty prompt with zero embeddings; cached per encoder."""
    key = id(text_stack)
    if key not in _NULL_CACHE:
        _NULL_CACHE[key] = assemble_condition("", None, text_stack)
    return _NULL_CACHE[key]
