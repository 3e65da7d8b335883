from .backbone import (
    ARCH,
    LATENT_CHANNELS,
    EncoderTaps,
    LatentAutoencoder,
    decode,
    decode_with_emasc,
    encode,
)
from .emasc import EmascModule, build_emasc_modules, emasc_forward, resize_mask
from .training import (
    batch_iter,
    pretrain_backbone,
    reconstruction_scores,
    train_emasc,
)

__all__ = [
    "ARCH",
    "LATENT_CHANNELS",
    "EmascModule",
    "EncoderTaps",
    "LatentAutoencoder",
    "batch_iter",
    "build_emasc_modules",
    "decode",
    "decode_with_emasc",
    "emasc_forward",
    "encode",
    "pretrain_backbone",
    "reconstruction_scores",
    "resize_mask",
    "train_emasc",
]
