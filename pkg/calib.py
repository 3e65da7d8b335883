"""Calibration driver: find toy budgets that pass the e2e color/L1 gates."""
import sys
import time
from pathlib import Path

import torch

from tryondiff.config import RunConfig
from tryondiff.dataset import write_toy_dataset
from tryondiff.cli import train_stage
from tryondiff.diffusion import TryOnPipeline
from tryondiff.dataset.manifest import build_manifest, load_pair
from tryondiff.dataset.types import SegLabel

root = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("/tmp/calib")
root.mkdir(parents=True, exist_ok=True)

cfg = RunConfig()
cfg.scale = "toy"
cfg.seed = 0
cfg.data.root = str(root / "data")
cfg.checkpoint_root = str(root / "ckpt")

if not (root / "data" / "layout.kv").exists():
    write_toy_dataset(cfg.data.root, n_train=128, n_test=24, preset=cfg.preset)

cfg.emasc.backbone_pretrain_steps = 2000
cfg.emasc.backbone_pretrain_lr = 1e-3
cfg.emasc.steps = 600
cfg.emasc.batch = 8
cfg.emasc.lr = 1e-3
cfg.emasc.warmup = 50
cfg.adapter.base_pretrain_steps = 800
cfg.adapter.base_pretrain_lr = 1e-3
cfg.adapter.steps = 500
cfg.adapter.batch = 8
cfg.adapter.lr = 1e-3
cfg.adapter.warmup = 50
cfg.warp.epochs = 50
cfg.warp.batch = 8
cfg.warp.lr = 2e-4
cfg.warp.max_steps_phase1 = 500
cfg.warp.max_steps_phase2 = 400
cfg.tryon.steps = 1800
cfg.tryon.batch = 8
cfg.tryon.lr = 1e-3
cfg.tryon.warmup = 50
cfg.sample.steps = 40
cfg.sample.guidance = 5.0

for stage in ("emasc", "adapter", "warp", "tryon"):
    t1 = time.time()
    train_stage(cfg, stage)
    print(f"{stage} done {time.time()-t1:.1f}s", flush=True)

# quality probes
from tryondiff.autoencoder import LatentAutoencoder, encode, decode
from tryondiff.checkpoints import read_manifest, load_weights

m = build_manifest(cfg.data.root, "test", cfg.preset)
pipe = TryOnPipeline.load(cfg.checkpoint_root, cfg)

# backbone recon quality
recs = [load_pair(m, rid, "paired") for rid in m.record_ids[:8]]
imgs = torch.stack([s.model_image for s in recs])
z, _ = encode(pipe.auto, imgs, deterministic=True)
rec = decode(pipe.auto, z)
print(f"backbone recon L1: {(rec-imgs).abs().mean().item():.4f}")

# warp probe: centroid distances
from tryondiff.warping import predict_warp, tps_apply, refine_warp, garment_crop
def centroid(img):
    w = (img > -0.97).any(dim=0).float()
    if w.sum() < 1: return None
    ys, xs = torch.nonzero(w, as_tuple=True)
    return ys.float().mean().item(), xs.float().mean().item()
dists_id, dists_warp = [], []
for s in recs:
    gt = garment_crop(s)
    c_gt = centroid(gt); c_in = centroid(s.garment)
    theta = predict_warp(pipe.warp_nets, s.garment, s.pose, s.agnostic)
    coarse = tps_apply(s.garment, theta, tuple(s.garment.shape[1:]))
    c_w = centroid(coarse)
    if None in (c_gt, c_in, c_w): continue
    dists_id.append(((c_in[0]-c_gt[0])**2 + (c_in[1]-c_gt[1])**2)**0.5)
    dists_warp.append(((c_w[0]-c_gt[0])**2 + (c_w[1]-c_gt[1])**2)**0.5)
print(f"centroid dist identity={sum(dists_id)/len(dists_id):.2f} warped={sum(dists_warp)/len(dists_warp):.2f}")
gt = garment_crop(recs[0])
theta = predict_warp(pipe.warp_nets, recs[0].garment, recs[0].pose, recs[0].agnostic)
coarse = tps_apply(recs[0].garment, theta, tuple(gt.shape[1:]))
ref = refine_warp(pipe.warp_nets, coarse, recs[0].pose, recs[0].agnostic)
print(f"warp L1 coarse={(coarse-gt).abs().mean().item():.4f} refined={(ref-gt).abs().mean().item():.4f}")

# e2e probes on unpaired
color_diffs, unmasked_l1s = [], []
for rid in m.record_ids[:20]:
    s = load_pair(m, rid, "unpaired")
    out = pipe.run_sample(s)
    region = (s.segmentation == int(SegLabel.UPPER_GARMENT))
    gen_color = out[:, region].mean(dim=1)
    shop_nonbg = (s.garment > -1).any(dim=0)
    target_color = s.garment[:, shop_nonbg].mean(dim=1)
    color_diffs.append((gen_color - target_color).abs().mean().item())
    keep = (1 - s.mask)
    unmasked_l1s.append((((out - s.model_image).abs() * keep).sum() / (keep.sum() * 3)).item())
cd = sum(color_diffs)/len(color_diffs)
ul = sum(unmasked_l1s)/len(unmasked_l1s)
print(f"E2E color diff mean: {cd:.4f}  (gate < 0.15)")
print(f"E2E unmasked L1 mean: {ul:.4f}  (gate < 0.1)")
print("color diffs:", [round(c, 3) for c in color_diffs])
