import time

import torch

from tryondiff.autoencoder import LatentAutoencoder, decode, encode, pretrain_backbone
from tryondiff.config import get_preset
from tryondiff.dataset import synth_toy_sample
from tryondiff.dataset.types import SegLabel
from tryondiff.warping.training import garment_crop

p = get_preset("toy")
samples = [synth_toy_sample(s, p) for s in range(384)]
test = [synth_toy_sample(s, p) for s in range(200, 216)]


def report(auto, tag):
    with torch.no_grad():
        for name in ("model", "garment", "crop"):
            if name == "model":
                imgs = torch.stack([s.model_image for s in test])
            elif name == "garment":
                imgs = torch.stack([s.garment for s in test])
            else:
                imgs = torch.stack([garment_crop(s) for s in test])
            z, _ = encode(auto, imgs)
            rec = decode(auto, z)
            l1 = (rec - imgs).abs().mean().item()
            errs = []
            for i, s in enumerate(test):
                if name == "garment":
                    region = (s.garment > -1).any(dim=0)
                else:
                    region = s.segmentation == int(SegLabel.UPPER_GARMENT)
                ref = imgs[i][:, region].mean(dim=1)
                got = rec[i][:, region].mean(dim=1)
                errs.append((ref - got).abs().mean().item())
            print(f"{tag} {name}: L1={l1:.4f} color_err={sum(errs)/len(errs):.4f}", flush=True)


auto = LatentAutoencoder("toy")
t0 = time.time()
for chunk in range(4):
    pretrain_backbone(auto, samples, steps=1000, lr=1e-3, batch=8, seed=chunk)
    for pr in auto.parameters():
        pr.requires_grad_(True)
    auto.train()
    report(auto, f"steps={1000 * (chunk + 1)} ({time.time() - t0:.0f}s)")
