"""End-to-end try-on orchestration over trained stage checkpoints."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import torch

from ..autoencoder.backbone import LatentAutoencoder, decode, decode_with_emasc, encode
from ..autoencoder.emasc import build_emasc_modules, resize_mask
from ..checkpoints import load_weights, read_manifest
from ..common import freeze
from ..config import RunConfig
from ..dataset.masks import make_agnostic
from ..dataset.pose import render_pose_map
from ..dataset.types import TryOnSample, check_image
from ..errors import DependencyError
from ..inversion.adapter import (
    InversionAdapter,
    assemble_condition,
    category_prompt,
    null_condition,
    predict_ptes,
)
from ..inversion.encoders import resolve_encoder
from ..warping.nets import WarpNets, predict_warp, refine_warp
from ..warping.tps import tps_apply
from .denoiser import TryOnDenoiser, extend_denoiser_input
from .sampler import sample
from .schedule import build_schedule
from .training import encode_scaled, pose_to_latent


def _record_seed(base_seed: int, record_id: str) -> int:
    digest = hashlib.sha256(record_id.encode()).digest()
    return (base_seed + int.from_bytes(digest[:4], "little")) % (2**31)


@dataclass
class TryOnPipeline:
    config: RunConfig
    auto: LatentAutoencoder
    emasc_modules: torch.nn.ModuleList
    adapter: InversionAdapter
    text_enc: object
    vis_enc: object
    warp_nets: WarpNets
    denoiser: TryOnDenoiser
    schedule: object = field(default=None)

    def __post_init__(self):
        if self.schedule is None:
            self.schedule = build_schedule(self.config.schedule.T, self.config.schedule.kind)

    @classmethod
    def load(cls, checkpoint_root: str | Path, config: RunConfig) -> "TryOnPipeline":
        root = Path(checkpoint_root)
        preset = config.preset

        def stage_dir(stage: str) -> Path:
            d = root / stage
            if not (d / "manifest.json").exists():
                raise DependencyError(
                    f"missing checkpoint for stage {stage!r} under {root}"
                )
            return d

        emasc_dir = stage_dir("emasc")
        emasc_manifest = read_manifest(emasc_dir, "emasc")
        auto = LatentAutoencoder(config.scale)
        load_weights(emasc_dir, emasc_manifest, "backbone", auto)
        freeze(auto)
        variant = emasc_manifest["extra"].get("variant", "nonlinear")
        masked = emasc_manifest["extra"].get("masked", True)
        modules = build_emasc_modules(
            auto.encoder.tap_channels, auto.decoder.stage_channels, variant, masked
        )
        if len(modules) > 0:
            load_weights(emasc_dir, emasc_manifest, "emasc", modules)
        freeze(modules)

        adapter_dir = stage_dir("adapter")
        adapter_manifest = read_manifest(adapter_dir, "adapter")
        vis_enc = resolve_encoder(adapter_manifest["extra"]["visual_encoder"])
        text_enc = resolve_encoder(adapter_manifest["extra"]["text_encoder"])
        adapter = InversionAdapter(
            visual_dim=vis_enc.token_dim,
            token_dim=text_enc.token_dim,
            num_ptes=adapter_manifest["extra"]["num_ptes"],
            dropout=config.adapter.mlp_dropout,
        )
        load_weights(adapter_dir, adapter_manifest, "adapter", adapter)
        freeze(adapter)

        warp_dir = stage_dir("warp")
        warp_manifest = read_manifest(warp_dir, "warp")
        warp_nets = WarpNets(preset, grid_size=warp_manifest["extra"].get("grid", 5),
                             scale=config.scale)
        load_weights(warp_dir, warp_manifest, "warp", warp_nets)
        freeze(warp_nets)

        tryon_dir = stage_dir("tryon")
        tryon_manifest = read_manifest(tryon_dir, "tryon")
        denoiser = TryOnDenoiser(in_channels=9, scale=config.scale)
        extend_denoiser_input(denoiser, 31)
        load_weights(tryon_dir, tryon_manifest, "denoiser", denoiser)
        freeze(denoiser)
        tuned_adapter = tryon_manifest["weights"].get("adapter")
        if tuned_adapter is not None:
            load_weights(tryon_dir, tryon_manifest, "adapter", adapter)
            freeze(adapter)

        return cls(
            config=config,
            auto=auto,
            emasc_modules=modules,
            adapter=adapter,
            text_enc=text_enc,
            vis_enc=vis_enc,
            warp_nets=warp_nets,
            denoiser=denoiser,
        )

    # -- mask fallback ---------------------------------------------------------

    def keypoint_box_mask(self, keypoints: torch.Tensor, category: str,
                          H: int, W: int) -> torch.Tensor:
        """Torso/lower/dress box from keypoints when no segmentation is given."""
        kp = keypoints
        margin = self.config.preset.mask_margin
        idx = {"neck": 1, "rsho": 2, "lsho": 5, "rhip": 8, "lhip": 11,
               "rkne": 9, "lkne": 12, "rank": 10, "lank": 13}
        if category == "upper":
            ys = [kp[idx["neck"]][1], kp[idx["rhip"]][1], kp[idx["lhip"]][1]]
            xs = [kp[idx["rsho"]][0], kp[idx["lsho"]][0]]
        elif category == "lower":
            ys = [kp[idx["rhip"]][1], kp[idx["rank"]][1], kp[idx["lank"]][1]]
            xs = [kp[idx["rhip"]][0], kp[idx["lhip"]][0]]
        else:
            ys = [kp[idx["neck"]][1], kp[idx["rkne"]][1], kp[idx["lkne"]][1]]
            xs = [kp[idx["rsho"]][0], kp[idx["lsho"]][0]]
        y0 = max(int(min(ys)) - margin, 0)
        y1 = min(int(max(ys)) + margin, H - 1)
        x0 = max(int(min(xs)) - 2 * margin, 0)
        x1 = min(int(max(xs)) + 2 * margin, W - 1)
        mask = torch.zeros(1, H, W)
        mask[:, y0 : y1 + 1, x0 : x1 + 1] = 1.0
        return mask

    # -- inference -------------------------------------------------------------

    def try_on(
        self,
        model_image: torch.Tensor,
        garment: torch.Tensor,
        keypoints: torch.Tensor,
        category: str,
        segmentation: torch.Tensor | None = None,
        mask: torch.Tensor | None = None,
        seed: int = 0,
        steps: int | None = None,
        guidance: float | None = None,
        use_emasc: bool = True,
        no_text: bool = False,
        no_warp: bool = False,
        text_override: str = "",
        paste_background: bool | None = None,
        return_artifacts: bool = False,
    ):
        """Generate the try-on image for one (model, garment) request."""
        from ..dataset.masks import build_inpaint_mask

        check_image(model_image, "model_image")
        check_image(garment, "garment")
        cfg = self.config
        preset = cfg.preset
        H, W = model_image.shape[1], model_image.shape[2]
        steps = cfg.sample.steps if steps is None else steps
        guidance = cfg.sample.guidance if guidance is None else guidance
        if paste_background is None:
            paste_background = cfg.sample.paste_background

        if mask is None:
            if segmentation is not None:
                mask = build_inpaint_mask(segmentation, category, preset.mask_margin)
            else:
                mask = self.keypoint_box_mask(keypoints, category, H, W)
        pose = render_pose_map(keypoints, H, W, preset.pose_sigma)
        agnostic = make_agnostic(model_image, mask)

        if no_warp:
            warped = None
            enc_warped = torch.zeros(4, H // 8, W // 8)
        else:
            theta = predict_warp(self.warp_nets, garment, pose, agnostic)
            coarse = tps_apply(garment, theta, (H, W))
            warped = refine_warp(self.warp_nets, coarse, pose, agnostic)
            enc_warped = encode_scaled(self.auto, warped.unsqueeze(0)).squeeze(0)

        null_seq = null_condition(self.text_enc)
        if no_text:
            text_encoded = null_seq.encoded
        else:
            ptes = predict_ptes(self.adapter, garment, self.vis_enc)
            prompt = text_override or category_prompt(cfg.adapter.prompt_template, category)
            text_encoded = assemble_condition(prompt, ptes, self.text_enc).encoded

        enc_ag = encode_scaled(self.auto, agnostic.unsqueeze(0)).squeeze(0)
        m_lat = resize_mask(mask, (H // 8, W // 8))
        p_lat = pose_to_latent(pose)

        z0 = sample(
            self.denoiser,
            self.schedule,
            fixed=dict(mask=m_lat, enc_agnostic=enc_ag, pose=p_lat, enc_warped=enc_warped),
            text_cond=text_encoded,
            null_text=null_seq.encoded,
            steps=steps,
            guidance=guidance,
            seed=seed,
        )
        z0 = z0 / self.auto.latent_scale

        if use_emasc and len(self.emasc_modules) > 0:
            _, taps = encode(self.auto, agnostic, want_taps=True, deterministic=True)
            out = decode_with_emasc(self.auto, z0, taps, mask, self.emasc_modules)
        else:
            out = decode(self.auto, z0)
        if paste_background:
            out = model_image * (1.0 - mask) + out * mask

        if return_artifacts:
            return out, dict(
                mask=mask, pose=pose, agnostic=agnostic, warped=warped,
                latent=z0, text=text_encoded,
            )
        return out

    def run_sample(self, sample_: TryOnSample, seed: int | None = None, **kw):
        """Apply try_on to a dataset sample, reusing its mask and pose inputs."""
        if seed is None:
            seed = _record_seed(self.config.seed, f"{sample_.record_id}:{sample_.garment_id}")
        return self.try_on(
            sample_.model_image,
            sample_.garment,
            sample_.keypoints,
            sample_.category,
            segmentation=sample_.segmentation,
            mask=sample_.mask,
            seed=seed,
            **kw,
        )

    def as_generator(self, **kw):
        return lambda s: self.run_sample(s, **kw)
