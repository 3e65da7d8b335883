"""Deterministic synthetic try-on data for desk-scale training and tests.

Each seed procedurally renders a "person" (head, torso, limbs placed at
keypoint-derived positions) wearing a flat-colored or striped rectangle
garment, together with a consistent segmentation map, 18 keypoints, the
inpainting mask, and an in-shop flat view of the same garment. All pixel
values live on the uint8 lattice so PNG serialization round-trips exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from ..config import ScalePreset
from .masks import build_inpaint_mask, make_agnostic
from .pose import render_pose_map
from .types import NUM_KEYPOINTS, SegLabel, TryOnSample

GARMENT_FILL_U8 = 0  # in-shop background, exactly -1.0 after conversion


def u8_to_float(img: np.ndarray) -> torch.Tensor:
    """uint8 H×W×C → float32 C×H×W in [-1, 1]."""
    t = torch.from_numpy(img.astype(np.float32) / 255.0 * 2.0 - 1.0)
    return t.permute(2, 0, 1).contiguous()


def float_to_u8(t: torch.Tensor) -> np.ndarray:
    arr = t.permute(1, 2, 0).clamp(-1, 1).numpy()
    return np.round((arr + 1.0) / 2.0 * 255.0).astype(np.uint8)


def _fill_rect(img, labels, y0, y1, x0, x1, color, label):
    y0, x0 = max(y0, 0), max(x0, 0)
    y1, x1 = min(y1, img.shape[0]), min(x1, img.shape[1])
    if y1 <= y0 or x1 <= x0:
        return
    img[y0:y1, x0:x1] = color
    labels[y0:y1, x0:x1] = label


def _paint(img, labels, region, color, label):
    img[region] = color
    labels[region] = label


def _segment_region(H, W, p0, p1, radius):
    ys, xs = np.mgrid[0:H, 0:W].astype(np.float64)
    p0 = np.asarray(p0, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    d = p1 - p0
    denom = float(d @ d)
    if denom < 1e-12:
        t = np.zeros((H, W))
    else:
        t = ((xs - p0[0]) * d[0] + (ys - p0[1]) * d[1]) / denom
        t = np.clip(t, 0.0, 1.0)
    px = p0[0] + t * d[0]
    py = p0[1] + t * d[1]
    return (xs - px) ** 2 + (ys - py) ** 2 <= radius * radius


def _disk_region(H, W, center, radius):
    ys, xs = np.mgrid[0:H, 0:W].astype(np.float64)
    return (xs - center[0]) ** 2 + (ys - center[1]) ** 2 <= radius * radius


def _garment_pattern(h, w, color, color2, stripes, stripe_h):
    patch = np.empty((h, w, 3), dtype=np.uint8)
    patch[:] = color
    if stripes:
        for y in range(h):
            if (y // stripe_h) % 2 == 1:
                patch[y, :] = color2
    return patch


def synth_toy_sample(seed: int, preset: ScalePreset) -> TryOnSample:
    """Deterministically synthesize one paired toy sample from `seed`."""
    rng = np.random.default_rng(int(seed))
    H, W = preset.height, preset.width
    u = H / 64.0

    bg = np.full(3, rng.integers(195, 230), dtype=np.uint8)
    skin = np.array(
        [rng.integers(170, 225), rng.integers(120, 180), rng.integers(95, 150)],
        dtype=np.uint8,
    )
    trouser = np.full(3, rng.integers(40, 90), dtype=np.uint8)
    color = rng.integers(40, 256, size=3).astype(np.uint8)
    stripes = bool(rng.random() < 0.5)
    color2 = rng.integers(40, 256, size=3).astype(np.uint8)
    stripe_h = max(int(round(3 * u)), 2)

    cx = W / 2.0 + float(rng.integers(-2, 3)) * u
    jit = lambda s: float(rng.uniform(-s, s)) * u

    def kp(x, y):
        return (
            float(np.clip(round(x), 0, W - 1)),
            float(np.clip(round(y), 0, H - 1)),
        )

    sh_dx = 7 * u + jit(0.7)
    hip_dx = 4 * u + jit(0.5)
    neck_y = 14 * u + jit(0.7)
    sh_y = neck_y + 1 * u
    hip_y = 36 * u + jit(1.0)
    pts = {
        "nose": kp(cx, 8 * u),
        "neck": kp(cx, neck_y),
        "rsho": kp(cx - sh_dx, sh_y),
        "relb": kp(cx - sh_dx - 2 * u, 24 * u + jit(1.0)),
        "rwri": kp(cx - sh_dx - 3 * u, 32 * u + jit(1.0)),
        "lsho": kp(cx + sh_dx, sh_y),
        "lelb": kp(cx + sh_dx + 2 * u, 24 * u + jit(1.0)),
        "lwri": kp(cx + sh_dx + 3 * u, 32 * u + jit(1.0)),
        "rhip": kp(cx - hip_dx, hip_y),
        "rkne": kp(cx - hip_dx, 47 * u),
        "rank": kp(cx - hip_dx, 58 * u),
        "lhip": kp(cx + hip_dx, hip_y),
        "lkne": kp(cx + hip_dx, 47 * u),
        "lank": kp(cx + hip_dx, 58 * u),
        "reye": kp(cx - 1.5 * u, 7 * u),
        "leye": kp(cx + 1.5 * u, 7 * u),
        "rear": kp(cx - 3 * u, 8 * u),
        "lear": kp(cx + 3 * u, 8 * u),
    }
    order = [
        "nose", "neck", "rsho", "relb", "rwri", "lsho", "lelb", "lwri",
        "rhip", "rkne", "rank", "lhip", "lkne", "lank", "reye", "leye",
        "rear", "lear",
    ]
    keypoints = np.array([[*pts[k], 1.0] for k in order], dtype=np.float32)

    img = np.empty((H, W, 3), dtype=np.uint8)
    img[:] = bg
    labels = np.zeros((H, W), dtype=np.uint8)

    leg_r = 1.8 * u
    arm_r = 1.4 * u
    for a, b in (("rhip", "rkne"), ("rkne", "rank"), ("lhip", "lkne"), ("lkne", "lank")):
        _paint(img, labels, _segment_region(H, W, pts[a], pts[b], leg_r), trouser, SegLabel.LEGS)
    for a, b in (("rsho", "relb"), ("relb", "rwri"), ("lsho", "lelb"), ("lelb", "lwri")):
        _paint(img, labels, _segment_region(H, W, pts[a], pts[b], arm_r), skin, SegLabel.ARMS)

    ty0 = int(round(pts["neck"][1]))
    ty1 = int(round(pts["rhip"][1]))
    tx0 = int(round(pts["rsho"][0]))
    tx1 = int(round(pts["lsho"][0])) + 1
    _fill_rect(img, labels, ty0, ty1, tx0, tx1, skin, SegLabel.TORSO)

    _paint(img, labels, _disk_region(H, W, pts["nose"], 4 * u), skin, SegLabel.HEAD)

    # Worn garment rectangle; the in-shop view reuses the same patch centered
    # on a black canvas, so paired worn/in-shop colors match pixel for pixel.
    gy0 = ty0 + max(int(round(u)), 1)
    gy1 = ty1
    gx0 = tx0 - max(int(round(u)), 1)
    gx1 = tx1 + max(int(round(u)), 1)
    gy0, gx0 = max(gy0, 0), max(gx0, 0)
    gy1, gx1 = min(gy1, H), min(gx1, W)
    gh, gw = gy1 - gy0, gx1 - gx0
    patch = _garment_pattern(gh, gw, color, color2, stripes, stripe_h)
    img[gy0:gy1, gx0:gx1] = patch
    labels[gy0:gy1, gx0:gx1] = SegLabel.UPPER_GARMENT

    shop = np.full((H, W, 3), GARMENT_FILL_U8, dtype=np.uint8)
    sy0 = (H - gh) // 2
    sx0 = (W - gw) // 2
    shop[sy0 : sy0 + gh, sx0 : sx0 + gw] = patch

    model_image = u8_to_float(img)
    garment = u8_to_float(shop)
    seg = torch.from_numpy(labels.astype(np.int64))
    mask = build_inpaint_mask(seg, "upper", margin=preset.mask_margin)
    pose = render_pose_map(keypoints, H, W, preset.pose_sigma)
    agnostic = make_agnostic(model_image, mask)

    return TryOnSample(
        model_image=model_image,
        garment=garment,
        mask=mask,
        pose=pose,
        agnostic=agnostic,
        category="upper",
        pairing="paired",
        record_id=f"{seed:06d}",
        garment_id=f"{seed:06d}",
        segmentation=seg,
        keypoints=torch.from_numpy(keypoints),
    )


def write_toy_dataset(
    root: str | Path,
    n_train: int,
    n_test: int,
    preset: ScalePreset,
    seed_base: int = 0,
) -> Path:
    """Serialize a toy dataset: lossless PNGs plus one metadata file per record."""
    from PIL import Image

    root = Path(root)
    rec_dir = root / "records"
    rec_dir.mkdir(parents=True, exist_ok=True)

    splits = {
        "train": [seed_base + i for i in range(n_train)],
        "test": [seed_base + n_train + i for i in range(n_test)],
    }
    for split, seeds in splits.items():
        ids = []
        for s in seeds:
            sample = synth_toy_sample(s, preset)
            rid = sample.record_id
            ids.append(rid)
            Image.fromarray(float_to_u8(sample.model_image)).save(rec_dir / f"{rid}_image.png")
            Image.fromarray(float_to_u8(sample.garment)).save(rec_dir / f"{rid}_garment.png")
            Image.fromarray(sample.segmentation.numpy().astype(np.uint8)).save(
                rec_dir / f"{rid}_labels.png"
            )
            lines = [f"category = {sample.category}"]
            for k in range(NUM_KEYPOINTS):
                x, y, v = sample.keypoints[k].tolist()
                lines.append(f"kp.{k:02d} = {x:g} {y:g} {int(v)}")
            (rec_dir / f"{rid}_meta.kv").write_text("\n".join(lines) + "\n")

        paired = [f"{rid} {rid}" for rid in ids]
        # Fixed-point-free permutation: cyclic shift, stored once and reloaded
        # verbatim so unpaired evaluation is reproducible across runs.
        unpaired = [f"{rid} {ids[(i + 1) % len(ids)]}" for i, rid in enumerate(ids)]
        (root / f"{split}_pairs_paired.txt").write_text("\n".join(paired) + "\n")
        (root / f"{split}_pairs_unpaired.txt").write_text("\n".join(unpaired) + "\n")

    (root / "layout.kv").write_text(
        "layout = toy\n"
        f"scale = {preset.name}\n"
        f"train_count = {n_train}\n"
        f"test_count = {n_test}\n"
    )
    return root
