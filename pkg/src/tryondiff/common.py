"""Small shared utilities: seeding, parameter hashing, freeze helpers."""

from __future__ import annotations

import hashlib

import torch
import torch.nn as nn


def make_generator(seed: int, device: str = "cpu") -> torch.Generator:
    g = torch.Generator(device=device)
    g.manual_seed(int(seed))
    return g


def seeded_init(module: nn.Module, seed: int) -> nn.Module:
    """Re-initialize every parameter of `module` from a private seeded stream.

    Used for the frozen toy encoders / feature stacks whose weights must be
    reproducible from a recorded seed alone.
    """
    g = make_generator(seed)
    with torch.no_grad():
        for p in module.parameters():
            if p.dim() >= 2:
                nn.init.kaiming_uniform_(p, a=5 ** 0.5, generator=g)
            else:
                p.uniform_(-0.05, 0.05, generator=g)
    return module


def weights_hash(module: nn.Module) -> str:
    """SHA-256 over the module's state dict (keys, shapes, and raw bytes)."""
    h = hashlib.sha256()
    state = module.state_dict()
    for key in sorted(state.keys()):
        t = state[key]
        h.update(key.encode())
        h.update(str(tuple(t.shape)).encode())
        h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def freeze(module: nn.Module) -> nn.Module:
    for p in module.parameters():
        p.requires_grad_(False)
    module.eval()
    return module


def is_frozen(module: nn.Module) -> bool:
    return all(not p.requires_grad for p in module.parameters())


def count_parameters(module: nn.Module, trainable_only: bool = False) -> int:
    return sum(
        p.numel()
        for p in module.parameters()
        if p.requires_grad or not trainable_only
    )
