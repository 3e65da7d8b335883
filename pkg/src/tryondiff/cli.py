"""Command-line entry points: train / warp / infer / eval / ablate.

Exit codes: 0 success, 2 config error, 3 dependency error, 4 data error.
The checkpoint root comes from the config file or the TRYONDIFF_CHECKPOINTS
environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np
import torch

from .autoencoder.backbone import LatentAutoencoder, decode, decode_with_emasc, encode
from .autoencoder.emasc import build_emasc_modules
from .autoencoder.training import (
    pretrain_backbone,
    reconstruction_scores,
    train_emasc,
)
from .checkpoints import (
    checkpoint_hash,
    load_weights,
    read_manifest,
    save_checkpoint,
)
from .common import freeze
from .config import RunConfig, parse_kv_file, write_kv_file
from .dataset.manifest import build_manifest, load_all, load_pair
from .dataset.toy import float_to_u8, u8_to_float
from .dataset.types import NUM_KEYPOINTS
from .diffusion.denoiser import TryOnDenoiser, extend_denoiser_input
from .diffusion.pipeline import TryOnPipeline
from .diffusion.sampler import sample as run_sampler
from .diffusion.schedule import build_schedule
from .diffusion.training import encode_scaled, pretrain_inpainting, train_tryon
from .errors import (
    CheckpointError,
    ConfigError,
    ContractError,
    DataError,
    DependencyError,
    FrozenModuleError,
    TryonError,
)
from .inversion.adapter import (
    InversionAdapter,
    assemble_condition,
    category_prompt,
    null_condition,
    predict_ptes,
)
from .inversion.encoders import resolve_encoder
from .inversion.training import train_adapter
from .metrics.evaluate import evaluate
from .metrics.lpips import lpips
from .metrics.ssim import ssim
from .optim import TrainLog
from .warping.nets import WarpNets
from .warping.training import train_warping

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEPENDENCY = 3
EXIT_DATA = 4

ENV_CHECKPOINT_ROOT = "TRYONDIFF_CHECKPOINTS"
STAGE_ORDER = ("emasc", "adapter", "warp", "tryon")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for kv in getattr(args, "set", None) or []:
        if "=" not in kv:
            raise ConfigError(f"--set expects key=value, got {kv!r}")
        key, _, value = kv.partition("=")
        cfg.set_key(key.strip(), value.strip())
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "steps", None) is not None:
        cfg.sample.steps = args.steps
    if getattr(args, "guidance", None) is not None:
        cfg.sample.guidance = args.guidance
    if getattr(args, "ptes", None) is not None:
        cfg.adapter.num_ptes = args.ptes
    for flag in getattr(args, "ablate", None) or []:
        if flag == "no_text":
            cfg.ablate.no_text = True
        elif flag == "no_warp":
            cfg.ablate.no_warp = True
        else:
            raise ConfigError(f"unknown ablation flag {flag!r}")
    return cfg


def _checkpoint_root(cfg: RunConfig) -> Path:
    root = cfg.checkpoint_root or os.environ.get(ENV_CHECKPOINT_ROOT, "")
    if not root:
        raise ConfigError(
            "no checkpoint root configured: set checkpoint_root in the config "
            f"or the {ENV_CHECKPOINT_ROOT} environment variable"
        )
    return Path(root)


def _require_stage(root: Path, stage: str) -> Path:
    d = root / stage
    if not (d / "manifest.json").exists():
        raise DependencyError(f"stage {stage!r} has no checkpoint under {root}")
    return d


def _train_samples(cfg: RunConfig):
    if not cfg.data.root:
        raise DataError("config data.root is empty; point it at a dataset directory")
    manifest = build_manifest(cfg.data.root, "train", cfg.preset)
    samples = load_all(manifest, "paired")
    if not samples:
        raise DataError(f"no training records found under {cfg.data.root}")
    return manifest, samples


# ---------------------------------------------------------------------------
# train


def train_stage(cfg: RunConfig, stage: str, resume: bool = False) -> Path:
    root = _checkpoint_root(cfg)
    if stage == "emasc":
        return _train_emasc_stage(cfg, root, resume)
    if stage == "adapter":
        return _train_adapter_stage(cfg, root, resume)
    if stage == "warp":
        return _train_warp_stage(cfg, root)
    if stage == "tryon":
        return _train_tryon_stage(cfg, root, resume)
    raise ConfigError(f"unknown stage {stage!r}")


def _resume_state(stage_dir: Path, stage: str, resume: bool):
    if resume and (stage_dir / "manifest.json").exists():
        manifest = read_manifest(stage_dir, stage)
        return manifest, int(manifest.get("step", 0))
    return None, 0


def _train_emasc_stage(cfg: RunConfig, root: Path, resume: bool) -> Path:
    _, samples = _train_samples(cfg)
    stage_dir = root / "emasc"
    prior, done = _resume_state(stage_dir, "emasc", resume)

    auto = LatentAutoencoder(cfg.scale)
    if prior is not None:
        load_weights(stage_dir, prior, "backbone", auto)
        freeze(auto)
    elif cfg.emasc.backbone_pretrain_steps > 0:
        pretrain_backbone(
            auto,
            samples,
            steps=cfg.emasc.backbone_pretrain_steps,
            lr=cfg.emasc.backbone_pretrain_lr,
            seed=cfg.seed,
            log=TrainLog(stage_dir / "backbone_log.txt"),
        )
    else:
        raise DependencyError(
            "no pretrained autoencoder backbone: set emasc.backbone_pretrain_steps "
            "for toy-scale pretraining or resume from a checkpoint"
        )

    modules = None
    if prior is not None and "emasc" in prior["weights"]:
        modules = build_emasc_modules(
            auto.encoder.tap_channels,
            auto.decoder.stage_channels,
            cfg.emasc.variant,
            cfg.emasc.masked,
        )
        load_weights(stage_dir, prior, "emasc", modules)
    remaining = max(cfg.emasc.steps - done, 0)
    modules, backbone_hash = train_emasc(
        auto,
        samples,
        cfg.emasc,
        steps=remaining,
        seed=cfg.seed + done,
        log=TrainLog(stage_dir / "log.txt", offset=done),
        modules=modules,
    )

    blobs = {"backbone": auto}
    if len(modules) > 0:
        blobs["emasc"] = modules
    save_checkpoint(
        stage_dir,
        "emasc",
        cfg.config_hash(),
        blobs,
        extra={
            "variant": cfg.emasc.variant,
            "masked": cfg.emasc.masked,
            "tap_ids": list(auto.tap_ids),
            "scale": cfg.scale,
            "backbone_hash": backbone_hash,
        },
        step=done + remaining,
    )
    return stage_dir


def _load_backbone(root: Path, cfg: RunConfig) -> LatentAutoencoder:
    emasc_dir = _require_stage(root, "emasc")
    manifest = read_manifest(emasc_dir, "emasc")
    auto = LatentAutoencoder(cfg.scale)
    load_weights(emasc_dir, manifest, "backbone", auto)
    return freeze(auto)


def _train_adapter_stage(cfg: RunConfig, root: Path, resume: bool) -> Path:
    _, samples = _train_samples(cfg)
    auto = _load_backbone(root, cfg)
    stage_dir = root / "adapter"
    prior, done = _resume_state(stage_dir, "adapter", resume)

    vis_enc = resolve_encoder(cfg.adapter.visual_encoder)
    text_enc = resolve_encoder(cfg.adapter.text_encoder)
    sched = build_schedule(cfg.schedule.T, cfg.schedule.kind)

    denoiser = TryOnDenoiser(in_channels=9, scale=cfg.scale)
    if prior is not None and "denoiser_base" in prior["weights"]:
        load_weights(stage_dir, prior, "denoiser_base", denoiser)
        freeze(denoiser)
    elif cfg.adapter.base_pretrain_steps > 0:
        pretrain_inpainting(
            denoiser,
            auto,
            text_enc,
            samples,
            sched,
            steps=cfg.adapter.base_pretrain_steps,
            lr=cfg.adapter.base_pretrain_lr,
            batch=cfg.adapter.batch,
            seed=cfg.seed,
            log=TrainLog(stage_dir / "base_log.txt"),
        )
        freeze(denoiser)
    else:
        raise DependencyError(
            "no pretrained inpainting denoiser: set adapter.base_pretrain_steps "
            "for toy-scale pretraining or resume from a checkpoint"
        )

    adapter = InversionAdapter(
        visual_dim=vis_enc.token_dim,
        token_dim=text_enc.token_dim,
        num_ptes=cfg.adapter.num_ptes,
        dropout=cfg.adapter.mlp_dropout,
    )
    if prior is not None:
        load_weights(stage_dir, prior, "adapter", adapter)
    remaining = max(cfg.adapter.steps - done, 0)
    train_adapter(
        adapter,
        denoiser,
        auto,
        text_enc,
        vis_enc,
        samples,
        sched,
        cfg.adapter,
        steps=remaining,
        seed=cfg.seed + done,
        log=TrainLog(stage_dir / "log.txt", offset=done),
    )
    save_checkpoint(
        stage_dir,
        "adapter",
        cfg.config_hash(),
        {"adapter": adapter, "denoiser_base": denoiser},
        extra={
            "num_ptes": cfg.adapter.num_ptes,
            "visual_encoder": cfg.adapter.visual_encoder,
            "text_encoder": cfg.adapter.text_encoder,
            "prompt_template": cfg.adapter.prompt_template,
        },
        companions={"emasc": checkpoint_hash(root / "emasc")},
        step=done + remaining,
    )
    return stage_dir


def _train_warp_stage(cfg: RunConfig, root: Path) -> Path:
    _, samples = _train_samples(cfg)
    stage_dir = root / "warp"
    nets = WarpNets(cfg.preset, grid_size=cfg.warp.grid, scale=cfg.scale)
    train_warping(
        nets,
        samples,
        cfg.warp,
        seed=cfg.seed,
        log_phase1=TrainLog(stage_dir / "log_phase1.txt"),
        log_phase2=TrainLog(stage_dir / "log_phase2.txt"),
    )
    save_checkpoint(
        stage_dir,
        "warp",
        cfg.config_hash(),
        {"warp": nets},
        extra={"grid": cfg.warp.grid, "scale": cfg.scale},
        step=cfg.warp.epochs,
    )
    return stage_dir


def _train_tryon_stage(cfg: RunConfig, root: Path, resume: bool) -> Path:
    _, samples = _train_samples(cfg)
    auto = _load_backbone(root, cfg)
    adapter_dir = _require_stage(root, "adapter")
    warp_dir = _require_stage(root, "warp")
    emasc_dir = root / "emasc"
    stage_dir = root / "tryon"
    prior, done = _resume_state(stage_dir, "tryon", resume)

    adapter_manifest = read_manifest(adapter_dir, "adapter")
    vis_enc = resolve_encoder(adapter_manifest["extra"]["visual_encoder"])
    text_enc = resolve_encoder(adapter_manifest["extra"]["text_encoder"])
    adapter = InversionAdapter(
        visual_dim=vis_enc.token_dim,
        token_dim=text_enc.token_dim,
        num_ptes=adapter_manifest["extra"]["num_ptes"],
        dropout=cfg.adapter.mlp_dropout,
    )
    load_weights(adapter_dir, adapter_manifest, "adapter", adapter)

    denoiser = TryOnDenoiser(in_channels=9, scale=cfg.scale)
    load_weights(adapter_dir, adapter_manifest, "denoiser_base", denoiser)
    extend_denoiser_input(denoiser, 31)
    if prior is not None:
        load_weights(stage_dir, prior, "denoiser", denoiser)
        load_weights(stage_dir, prior, "adapter", adapter)

    warp_manifest = read_manifest(warp_dir, "warp")
    warp_nets = WarpNets(cfg.preset, grid_size=warp_manifest["extra"]["grid"], scale=cfg.scale)
    load_weights(warp_dir, warp_manifest, "warp", warp_nets)
    freeze(warp_nets)

    emasc_manifest = read_manifest(emasc_dir, "emasc")
    emasc_modules = build_emasc_modules(
        auto.encoder.tap_channels,
        auto.decoder.stage_channels,
        emasc_manifest["extra"].get("variant", "nonlinear"),
        emasc_manifest["extra"].get("masked", True),
    )
    if len(emasc_modules) > 0:
        load_weights(emasc_dir, emasc_manifest, "emasc", emasc_modules)
    freeze(emasc_modules)

    sched = build_schedule(cfg.schedule.T, cfg.schedule.kind)
    remaining = max(cfg.tryon.steps - done, 0)
    train_tryon(
        denoiser,
        adapter,
        auto,
        warp_nets,
        text_enc,
        vis_enc,
        samples,
        sched,
        cfg.tryon,
        prompt_template=adapter_manifest["extra"]["prompt_template"],
        emasc_modules=emasc_modules,
        steps=remaining,
        seed=cfg.seed + done,
        log=TrainLog(stage_dir / "log.txt", offset=done),
        no_warp=cfg.ablate.no_warp,
        no_text=cfg.ablate.no_text,
    )
    save_checkpoint(
        stage_dir,
        "tryon",
        cfg.config_hash(),
        {"denoiser": denoiser, "adapter": adapter},
        extra={
            "channels": 31,
            "schedule_T": cfg.schedule.T,
            "schedule_kind": cfg.schedule.kind,
            "no_warp": cfg.ablate.no_warp,
            "no_text": cfg.ablate.no_text,
        },
        companions={
            "emasc": checkpoint_hash(emasc_dir),
            "adapter": checkpoint_hash(adapter_dir),
            "warp": checkpoint_hash(warp_dir),
        },
        step=done + remaining,
    )
    return stage_dir


# ---------------------------------------------------------------------------
# infer / warp


def _read_image_file(path: str) -> torch.Tensor:
    from PIL import Image

    p = Path(path)
    if not p.exists():
        raise DataError(f"missing input file: {p}")
    return u8_to_float(np.asarray(Image.open(p).convert("RGB")))


def _read_keypoints_file(path: str) -> torch.Tensor:
    p = Path(path)
    if not p.exists():
        raise DataError(f"missing input file: {p}")
    rows = []
    for line in p.read_text().splitlines():
        parts = line.split()
        if parts:
            rows.append([float(v) for v in parts])
    if len(rows) != NUM_KEYPOINTS or any(len(r) != 3 for r in rows):
        raise DataError(f"{p}: expected {NUM_KEYPOINTS} 'x y v' keypoint lines")
    return torch.tensor(rows, dtype=torch.float32)


def _write_image_file(image: torch.Tensor, path: str | Path) -> None:
    from PIL import Image

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(float_to_u8(image)).save(path)


def cmd_infer(cfg: RunConfig, args) -> Path:
    root = _checkpoint_root(cfg)
    pipeline = TryOnPipeline.load(root, cfg)
    model_image = _read_image_file(args.model_image)
    garment = _read_image_file(args.garment)
    keypoints = _read_keypoints_file(args.keypoints)
    segmentation = None
    if args.labels:
        from PIL import Image

        p = Path(args.labels)
        if not p.exists():
            raise DataError(f"missing input file: {p}")
        segmentation = torch.from_numpy(np.asarray(Image.open(p)).astype(np.int64))

    out = pipeline.try_on(
        model_image,
        garment,
        keypoints,
        args.category,
        segmentation=segmentation,
        seed=cfg.seed,
        steps=cfg.sample.steps,
        guidance=cfg.sample.guidance,
        no_text=cfg.ablate.no_text,
        no_warp=cfg.ablate.no_warp,
        text_override=cfg.ablate.text_override,
    )
    out_path = Path(args.out)
    _write_image_file(out, out_path)
    write_kv_file(
        out_path.with_suffix(out_path.suffix + ".meta"),
        {
            "seed": cfg.seed,
            "steps": cfg.sample.steps,
            "guidance": cfg.sample.guidance,
            "scale": cfg.scale,
            "no_text": cfg.ablate.no_text,
            "no_warp": cfg.ablate.no_warp,
            "num_ptes": cfg.adapter.num_ptes,
            "config_hash": cfg.config_hash(),
        },
    )
    return out_path


def cmd_warp(cfg: RunConfig, args) -> Path:
    from .warping.nets import predict_warp, refine_warp
    from .warping.tps import tps_apply

    root = _checkpoint_root(cfg)
    warp_dir = _require_stage(root, "warp")
    manifest = read_manifest(warp_dir, "warp")
    nets = WarpNets(cfg.preset, grid_size=manifest["extra"]["grid"], scale=cfg.scale)
    load_weights(warp_dir, manifest, "warp", nets)
    freeze(nets)

    garment = _read_image_file(args.garment)
    agnostic = _read_image_file(args.agnostic)
    keypoints = _read_keypoints_file(args.pose)
    from .dataset.pose import render_pose_map

    H, W = agnostic.shape[1], agnostic.shape[2]
    pose = render_pose_map(keypoints, H, W, cfg.preset.pose_sigma)
    theta = predict_warp(nets, garment, pose, agnostic)
    coarse = tps_apply(garment, theta, (H, W))
    warped = refine_warp(nets, coarse, pose, agnostic)
    out_path = Path(args.out)
    _write_image_file(warped, out_path)
    return out_path


# ---------------------------------------------------------------------------
# eval / ablate


def cmd_eval(cfg: RunConfig, args) -> Path:
    if not cfg.data.root:
        raise DataError("config data.root is empty")
    manifest = build_manifest(cfg.data.root, "test", cfg.preset)
    ids = manifest.record_ids
    if args.limit:
        ids = ids[: args.limit]

    if args.generator == "identity":
        generator = lambda s: s.model_image
    else:
        pipeline = TryOnPipeline.load(_checkpoint_root(cfg), cfg)
        generator = pipeline.as_generator(
            no_text=cfg.ablate.no_text,
            no_warp=cfg.ablate.no_warp,
            text_override=cfg.ablate.text_override,
        )

    report = evaluate(
        generator,
        manifest,
        args.setting,
        config_hash=cfg.config_hash(),
        record_ids=ids,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write(out_dir / f"report_{args.setting}.kv")
    (out_dir / f"report_{args.setting}.row").write_text(report.table_row() + "\n")
    print(report.table_row())
    return out_dir


def _sample_inpaint_only(cfg, denoiser, auto, text_enc, sample_obj, text_encoded, seed):
    """9-channel sampling path used by the embedding-count ablation grid."""
    from .autoencoder.emasc import resize_mask
    from .diffusion.training import encode_scaled as enc

    e_ag = enc(auto, sample_obj.agnostic.unsqueeze(0)).squeeze(0)
    m = resize_mask(sample_obj.mask, (e_ag.shape[-2], e_ag.shape[-1]))
    sched = build_schedule(cfg.schedule.T, cfg.schedule.kind)
    z0 = run_sampler(
        denoiser,
        sched,
        fixed=dict(mask=m, enc_agnostic=e_ag),
        text_cond=text_encoded,
        null_text=null_condition(text_enc).encoded,
        steps=cfg.sample.steps,
        guidance=cfg.sample.guidance,
        seed=seed,
    )
    return decode(auto, z0 / auto.latent_scale)


def cmd_ablate(cfg: RunConfig, args) -> Path:
    root = _checkpoint_root(cfg)
    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    rows: list[str] = []

    if args.grid == "table5":
        _, train_set = _train_samples(cfg)
        test_manifest = build_manifest(cfg.data.root, "test", cfg.preset)
        test_ids = test_manifest.record_ids[: args.limit or None]
        test_set = [load_pair(test_manifest, rid, "paired") for rid in test_ids]
        auto = _load_backbone(root, cfg)
        for variant, masked in (("none", False), ("linear", True), ("nonlinear", True)):
            if variant == "none":
                modules = None
            else:
                from .config import EmascConfig

                vcfg = EmascConfig(**{**cfg.emasc.__dict__, "variant": variant, "masked": masked})
                modules, _ = train_emasc(auto, train_set, vcfg, seed=cfg.seed)
            l1_val, _ = reconstruction_scores(auto, test_set, modules)
            ssim_vals, lpips_vals = [], []
            with torch.no_grad():
                for s in test_set:
                    z, _ = encode(auto, s.model_image, deterministic=True)
                    if modules is not None and len(modules) > 0:
                        _, taps = encode(auto, s.agnostic, want_taps=True,
                                         deterministic=True)
                        recon = decode_with_emasc(auto, z, taps, s.mask, modules)
                    else:
                        recon = decode(auto, z)
                    ssim_vals.append(ssim(recon, s.model_image))
                    lpips_vals.append(lpips(recon, s.model_image))
            rows.append(
                f"grid=table5\tvariant={variant}\tmasked={masked}"
                f"\tlpips={sum(lpips_vals)/len(lpips_vals):.6f}"
                f"\tssim={sum(ssim_vals)/len(ssim_vals):.6f}\tl1={l1_val:.6f}"
            )

    elif args.grid == "table3":
        test_manifest = build_manifest(cfg.data.root, "test", cfg.preset)
        ids = test_manifest.record_ids[: args.limit or None]
        pipeline = TryOnPipeline.load(root, cfg)
        for label, flags in (
            ("full", {}),
            ("no_text", {"no_text": True}),
            ("no_warp", {"no_warp": True}),
        ):
            report = evaluate(
                pipeline.as_generator(**flags),
                test_manifest,
                "paired",
                config_hash=cfg.config_hash(),
                record_ids=ids,
            )
            kv = report.to_kv()
            rows.append(
                f"grid=table3\tconfig={label}\tssim={kv['ssim']:.6f}"
                f"\tlpips={kv['lpips']:.6f}\tfid_paired={kv['fid_paired']:.6f}"
                f"\tkid_paired={kv['kid_paired']:.6f}"
            )

    elif args.grid == "table4":
        _, train_set = _train_samples(cfg)
        test_manifest = build_manifest(cfg.data.root, "test", cfg.preset)
        ids = test_manifest.record_ids[: args.limit or None]
        auto = _load_backbone(root, cfg)
        adapter_dir = _require_stage(root, "adapter")
        adapter_manifest = read_manifest(adapter_dir, "adapter")
        vis_enc = resolve_encoder(adapter_manifest["extra"]["visual_encoder"])
        text_enc = resolve_encoder(adapter_manifest["extra"]["text_encoder"])
        denoiser = TryOnDenoiser(in_channels=9, scale=cfg.scale)
        load_weights(adapter_dir, adapter_manifest, "denoiser_base", denoiser)
        freeze(denoiser)
        sched = build_schedule(cfg.schedule.T, cfg.schedule.kind)
        for n_ptes in (1, 4, 16, 32):
            adapter = InversionAdapter(
                visual_dim=vis_enc.token_dim,
                token_dim=text_enc.token_dim,
                num_ptes=n_ptes,
                dropout=cfg.adapter.mlp_dropout,
            )
            from .config import AdapterConfig

            acfg = AdapterConfig(**{**cfg.adapter.__dict__, "num_ptes": n_ptes})
            train_adapter(
                adapter, denoiser, auto, text_enc, vis_enc, train_set, sched, acfg,
                seed=cfg.seed,
            )
            ssim_vals, lpips_vals = [], []
            for rid in ids:
                s = load_pair(test_manifest, rid, "paired")
                ptes = predict_ptes(adapter, s.garment, vis_enc)
                prompt = category_prompt(cfg.adapter.prompt_template, s.category)
                text_encoded = assemble_condition(prompt, ptes, text_enc).encoded
                gen = _sample_inpaint_only(cfg, denoiser, auto, text_enc, s,
                                           text_encoded, seed=cfg.seed)
                ssim_vals.append(ssim(gen, s.model_image))
                lpips_vals.append(lpips(gen, s.model_image))
            rows.append(
                f"grid=table4\tnum_ptes={n_ptes}"
                f"\tssim={sum(ssim_vals)/len(ssim_vals):.6f}"
                f"\tlpips={sum(lpips_vals)/len(lpips_vals):.6f}"
            )
    else:
        raise ConfigError(f"unknown ablation grid {args.grid!r}")

    out_path.write_text("\n".join(rows) + "\n")
    for row in rows:
        print(row)
    return out_path


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tryondiff")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="run config file (key = value)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key")
        p.add_argument("--seed", type=int, default=None)

    p_train = sub.add_parser("train", help="train one pipeline stage")
    common(p_train)
    p_train.add_argument("--stage", required=True, choices=STAGE_ORDER)
    p_train.add_argument("--resume", action="store_true")

    p_warp = sub.add_parser("warp", help="warp a garment onto a body")
    common(p_warp)
    p_warp.add_argument("--garment", required=True)
    p_warp.add_argument("--pose", required=True, help="18-keypoint 'x y v' file")
    p_warp.add_argument("--agnostic", required=True)
    p_warp.add_argument("--out", required=True)

    p_infer = sub.add_parser("infer", help="run the full try-on pipeline")
    common(p_infer)
    p_infer.add_argument("--model-image", required=True)
    p_infer.add_argument("--garment", required=True)
    p_infer.add_argument("--keypoints", required=True)
    p_infer.add_argument("--labels", default=None)
    p_infer.add_argument("--category", default="upper")
    p_infer.add_argument("--out", required=True)
    p_infer.add_argument("--steps", type=int, default=None)
    p_infer.add_argument("--guidance", type=float, default=None)
    p_infer.add_argument("--ptes", type=int, default=None)
    p_infer.add_argument("--ablate", action="append", choices=["no_text", "no_warp"])

    p_eval = sub.add_parser("eval", help="run the evaluation protocol")
    common(p_eval)
    p_eval.add_argument("--setting", required=True, choices=["paired", "unpaired"])
    p_eval.add_argument("--out-dir", default="eval_out")
    p_eval.add_argument("--limit", type=int, default=0)
    p_eval.add_argument("--generator", default="pipeline", choices=["pipeline", "identity"])

    p_ablate = sub.add_parser("ablate", help="run an ablation grid")
    common(p_ablate)
    p_ablate.add_argument("--grid", required=True, choices=["table3", "table4", "table5"])
    p_ablate.add_argument("--out", default="ablation_grid.tsv")
    p_ablate.add_argument("--limit", type=int, default=0)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "train":
            out = train_stage(cfg, args.stage, resume=args.resume)
        elif args.command == "warp":
            out = cmd_warp(cfg, args)
        elif args.command == "infer":
            out = cmd_infer(cfg, args)
        elif args.command == "eval":
            out = cmd_eval(cfg, args)
        elif args.command == "ablate":
            out = cmd_ablate(cfg, args)
        else:
            raise ConfigError(f"unknown command {args.command!r}")
        print(f"done: {out}")
        return EXIT_OK
    except (ConfigError, ContractError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DependencyError, CheckpointError, FrozenModuleError) as exc:
        print(f"dependency error: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TryonError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
