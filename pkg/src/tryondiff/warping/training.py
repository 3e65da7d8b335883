"""Two-phase warping training: geometric matching, then refinement."""

from __future__ import annotations

import torch

from ..common import make_generator
from ..config import WarpConfig
from ..dataset.types import GARMENT_LABEL, TryOnSample
from ..errors import DataError
from ..losses import PerceptualLoss, l1_loss
from ..optim import TrainLog, make_adam
from .nets import WarpNets
from .tps import control_grid

WARP_FILL = -1.0


def garment_crop(sample: TryOnSample) -> torch.Tensor:
    """Ground-truth worn garment: the garment-segmented region of the model
    image over the constant warp background."""
    if sample.segmentation is None:
        raise DataError(
            f"record {sample.record_id!r} has no segmentation; warping training "
            "needs the ground-truth worn garment region"
        )
    label = int(GARMENT_LABEL[sample.category])
    region = (sample.segmentation == label).float().unsqueeze(0)
    return sample.model_image * region + WARP_FILL * (1.0 - region)


def _batches(samples, batch, steps, seed):
    g = make_generator(seed)
    n = len(samples)
    for _ in range(steps):
        idx = torch.randint(0, n, (batch,), generator=g)
        group = [samples[i] for i in idx.tolist()]
        yield (
            torch.stack([s.garment for s in group]),
            torch.stack([s.pose for s in group]),
            torch.stack([s.agnostic for s in group]),
            torch.stack([garment_crop(s) for s in group]),
        )


def train_warping(
    nets: WarpNets,
    samples,
    cfg: WarpConfig,
    seed: int = 0,
    log_phase1: TrainLog | None = None,
    log_phase2: TrainLog | None = None,
    perceptual: PerceptualLoss | None = None,
) -> WarpNets:
    """Phase 1 trains matching+TPS with L1; phase 2 trains the refiner with
    L1 + perceptual. Paired samples with ground-truth segmentation required."""
    for s in samples:
        if s.segmentation is None:
            raise DataError(f"record {s.record_id!r} lacks ground-truth segmentation")
    if perceptual is None:
        perceptual = PerceptualLoss()

    steps_per_epoch = max(1, (len(samples) + cfg.batch - 1) // cfg.batch)
    steps1 = cfg.epochs * steps_per_epoch
    if cfg.max_steps_phase1 > 0:
        steps1 = min(steps1, cfg.max_steps_phase1)
    steps2 = cfg.epochs * steps_per_epoch
    if cfg.max_steps_phase2 > 0:
        steps2 = min(steps2, cfg.max_steps_phase2)

    grid = torch.from_numpy(control_grid(nets.grid_size)).float()

    # Phase 1: garment/person features + regressor through the TPS warp.
    phase1_params = list(nets.feat_garment.parameters()) + \
        list(nets.feat_person.parameters()) + list(nets.regressor.parameters())
    opt1 = make_adam(phase1_params, lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    nets.train()
    for step, (garment, pose, agnostic, target) in enumerate(
        _batches(samples, cfg.batch, steps1, seed)
    ):
        disp = nets.predict_displacements(garment, pose, agnostic)
        coarse = nets.tps(garment, grid.unsqueeze(0) + disp)
        loss = l1_loss(coarse, target)
        opt1.zero_grad()
        loss.backward()
        opt1.step()
        if log_phase1 is not None:
            log_phase1.write(step + 1, loss.item(), cfg.lr)

    # Phase 2: refinement on frozen coarse warps.
    opt2 = make_adam(nets.refiner.parameters(), lr=cfg.lr, betas=(cfg.beta1, cfg.beta2))
    for step, (garment, pose, agnostic, target) in enumerate(
        _batches(samples, cfg.batch, steps2, seed + 1)
    ):
        with torch.no_grad():
            dst = nets.target_points(garment, pose, agnostic)
            coarse = nets.tps(garment, dst)
        refined = nets.refiner(torch.cat([coarse, pose, agnostic], dim=1))
        loss = l1_loss(refined, target) + cfg.perceptual_weight * perceptual(refined, target)
        opt2.zero_grad()
        loss.backward()
        opt2.step()
        if log_phase2 is not None:
            log_phase2.write(step + 1, loss.item(), cfg.lr)

    nets.mark_trained()
    nets.eval()
    return nets
