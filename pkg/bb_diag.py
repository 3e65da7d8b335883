import time

import torch

from tryondiff.autoencoder import LatentAutoencoder, decode, encode, pretrain_backbone
from tryondiff.config import get_preset
from tryondiff.dataset import synth_toy_sample
from tryondiff.dataset.types import SegLabel

p = get_preset("toy")
train = [synth_toy_sample(s, p) for s in range(128)]
held = [synth_toy_sample(s, p) for s in range(300, 316)]

auto = LatentAutoencoder("toy")
t0 = time.time()
pretrain_backbone(auto, train, steps=1500, lr=1e-3, batch=8, seed=0)
print(f"trained {time.time()-t0:.0f}s")


def garment_color_err(samples):
    errs = []
    with torch.no_grad():
        for s in samples:
            z, _ = encode(auto, s.model_image)
            rec = decode(auto, z)
            region = s.segmentation == int(SegLabel.UPPER_GARMENT)
            errs.append(
                (rec[:, region].mean(dim=1) - s.model_image[:, region].mean(dim=1))
                .abs().mean().item()
            )
    return sum(errs) / len(errs)


print(f"train garment color err: {garment_color_err(train[:16]):.4f}")
print(f"held  garment color err: {garment_color_err(held):.4f}")

# flat full-image colors, unseen
g = torch.Generator().manual_seed(123)
errs = []
with torch.no_grad():
    for _ in range(24):
        c = torch.randint(40, 256, (3,), generator=g).float() / 255 * 2 - 1
        img = c[:, None, None].expand(3, 64, 48).contiguous()
        z, _ = encode(auto, img)
        rec = decode(auto, z)
        errs.append((rec.mean(dim=(1, 2)) - c).abs().mean().item())
print(f"flat full-image color err: {sum(errs)/len(errs):.4f}")

# garment-style patches at body position, unseen colors
errs = []
with torch.no_grad():
    for i, s in enumerate(held):
        c = torch.randint(40, 256, (3,), generator=g).float() / 255 * 2 - 1
        img = torch.full((3, 64, 48), -1.0)
        region = s.segmentation == int(SegLabel.UPPER_GARMENT)
        img[:, region] = c[:, None]
        z, _ = encode(auto, img)
        rec = decode(auto, z)
        errs.append((rec[:, region].mean(dim=1) - c).abs().mean().item())
print(f"unseen flat patch color err: {sum(errs)/len(errs):.4f}")
