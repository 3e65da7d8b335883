"""Geometric matching and refinement networks for garment warping.

Two convolutional branches encode the in-shop garment and the cloth-agnostic
person representation (pose map + agnostic image); their all-pairs feature
correlation feeds a regressor that predicts target control points for the
thin-plate-spline warp. An encoder-decoder with skip connections refines the
coarse warp conditioned on pose and the agnostic image.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ContractError, TryonError
from .tps import FixedGridTps, TpsParams, control_grid, tps_fit

ARCH = {
    "toy": dict(downs=2, feat=32, reg=(96, 48), refine=(24, 48)),
    "full": dict(downs=4, feat=64, reg=(256, 128), refine=(64, 128)),
}


def correlation_map(feat_garment: torch.Tensor, feat_person: torch.Tensor) -> torch.Tensor:
    """All-pairs normalized dot products between two c×h×w feature maps.

    Entry [(i·w + j), y, x] is the cosine of the garment feature at (i, j)
    with the person feature at (y, x). Batched inputs return B×(h·w)×h×w.
    """
    squeeze = feat_garment.dim() == 3
    g = feat_garment.unsqueeze(0) if squeeze else feat_garment
    p = feat_person.unsqueeze(0) if squeeze else feat_person
    if g.shape != p.shape:
        raise ContractError(
            f"feature maps must share shape, got {tuple(g.shape)} vs {tuple(p.shape)}"
        )
    B, c, h, w = g.shape
    g_flat = F.normalize(g.flatten(2), dim=1)   # B×c×hw, unit garment vectors
    p_flat = F.normalize(p.flatten(2), dim=1)
    corr = torch.bmm(g_flat.transpose(1, 2), p_flat)  # B×hw(garment)×hw(person)
    corr = corr.reshape(B, h * w, h, w)
    return corr.squeeze(0) if squeeze else corr


class FeatureExtractor(nn.Module):
    def __init__(self, in_ch: int, base: int, downs: int):
        super().__init__()
        layers = []
        prev = in_ch
        ch = base
        for _ in range(downs):
            layers += [nn.Conv2d(prev, ch, 3, stride=2, padding=1), nn.ReLU(inplace=True),
                       nn.Conv2d(ch, ch, 3, padding=1), nn.ReLU(inplace=True)]
            prev = ch
            ch = min(ch * 2, 4 * base)
        self.net = nn.Sequential(*layers)
        self.out_channels = prev

    def forward(self, x):
        return self.net(x)


class TpsRegressor(nn.Module):
    """Correlation tensor → 2K control-point displacements (tanh-bounded)."""

    def __init__(self, corr_channels: int, corr_dims: tuple[int, int], grid_size: int,
                 hidden: tuple[int, int], max_disp: float = 1.0):
        super().__init__()
        self.grid_size = grid_size
        self.max_disp = max_disp
        h, w = corr_dims
        c1, c2 = hidden
        self.conv = nn.Sequential(
            nn.Conv2d(corr_channels, c1, 3, stride=2, padding=1), nn.ReLU(inplace=True),
            nn.Conv2d(c1, c2, 3, stride=2, padding=1), nn.ReLU(inplace=True),
        )
        h2, w2 = (h + 3) // 4, (w + 3) // 4
        self.fc = nn.Sequential(
            nn.Linear(c2 * h2 * w2, 128), nn.ReLU(inplace=True),
            nn.Linear(128, 2 * grid_size * grid_size),
        )
        nn.init.zeros_(self.fc[-1].weight)
        nn.init.zeros_(self.fc[-1].bias)

    def forward(self, corr: torch.Tensor) -> torch.Tensor:
        h = self.conv(corr).flatten(1)
        disp = torch.tanh(self.fc(h)) * self.max_disp
        return disp.reshape(-1, self.grid_size * self.grid_size, 2)


class RefineUNet(nn.Module):
    """Encoder-decoder with skip connections: [Ĉ; P; I_M] (24 ch) → refined garment."""

    def __init__(self, in_ch: int = 24, base: int = 48):
        super().__init__()
        self.enc1 = nn.Sequential(nn.Conv2d(in_ch, base, 3, padding=1), nn.ReLU(inplace=True))
        self.enc2 = nn.Sequential(nn.Conv2d(base, base * 2, 3, stride=2, padding=1),
                                  nn.ReLU(inplace=True))
        self.mid = nn.Sequential(nn.Conv2d(base * 2, base * 2, 3, padding=1),
                                 nn.ReLU(inplace=True))
        self.dec1 = nn.Sequential(nn.Conv2d(base * 3, base, 3, padding=1), nn.ReLU(inplace=True))
        self.out = nn.Conv2d(base, 3, 3, padding=1)

    def forward(self, x):
        e1 = self.enc1(x)
        e2 = self.enc2(e1)
        m = self.mid(e2)
        up = F.interpolate(m, size=e1.shape[-2:], mode="nearest")
        d1 = self.dec1(torch.cat([up, e1], dim=1))
        return torch.tanh(self.out(d1))


class WarpNets(nn.Module):
    """Garment/person feature branches, the TPS regressor, and the refiner."""

    def __init__(self, preset, grid_size: int = 5, scale: str = "toy"):
        super().__init__()
        arch = ARCH[scale]
        self.grid_size = grid_size
        self.preset = preset
        self.feat_garment = FeatureExtractor(3, arch["feat"], arch["downs"])
        self.feat_person = FeatureExtractor(18 + 3, arch["feat"], arch["downs"])
        h_f = preset.height // (2 ** arch["downs"])
        w_f = preset.width // (2 ** arch["downs"])
        self.corr_dims = (h_f, w_f)
        self.regressor = TpsRegressor(h_f * w_f, (h_f, w_f), grid_size, arch["reg"])
        self.refiner = RefineUNet(in_ch=24, base=arch["refine"][1])
        self.tps = FixedGridTps(grid_size, (preset.height, preset.width))
        self.register_buffer("trained_flag", torch.tensor(0, dtype=torch.int64))

    @property
    def is_trained(self) -> bool:
        return bool(self.trained_flag.item())

    def mark_trained(self) -> None:
        self.trained_flag.fill_(1)

    def predict_displacements(self, garment, pose, agnostic) -> torch.Tensor:
        fg = self.feat_garment(garment)
        fp = self.feat_person(torch.cat([pose, agnostic], dim=1))
        corr = correlation_map(fg, fp)
        return self.regressor(corr)

    def target_points(self, garment, pose, agnostic) -> torch.Tensor:
        grid = torch.from_numpy(control_grid(self.grid_size)).float()
        disp = self.predict_displacements(garment, pose, agnostic)
        return grid.unsqueeze(0) + disp


def predict_warp(nets: WarpNets, garment: torch.Tensor, pose: torch.Tensor,
                 agnostic: torch.Tensor) -> TpsParams:
    """Regress TPS parameters for one sample (deterministic, inference only)."""
    if not nets.is_trained:
        raise TryonError("warp networks are untrained; train or load a checkpoint first")
    was_training = nets.training
    nets.eval()
    with torch.no_grad():
        dst = nets.target_points(
            garment.unsqueeze(0), pose.unsqueeze(0), agnostic.unsqueeze(0)
        )[0]
    if was_training:
        nets.train()
    return tps_fit(control_grid(nets.grid_size), dst.double().numpy())


def refine_warp(nets: WarpNets, coarse: torch.Tensor, pose: torch.Tensor,
                agnostic: torch.Tensor) -> torch.Tensor:
    """Fuse the coarse warp with pose and the agnostic image; output in [-1, 1]."""
    squeeze = coarse.dim() == 3
    c = coarse.unsqueeze(0) if squeeze else coarse
    p = pose.unsqueeze(0) if squeeze else pose
    a = agnostic.unsqueeze(0) if squeeze else agnostic
    if not (c.shape[-2:] == p.shape[-2:] == a.shape[-2:]):
        raise ContractError("coarse garment, pose, and agnostic image must share H×W")
    x = torch.cat([c, p, a], dim=1)
    if x.shape[1] != 24:
        raise ContractError(f"refiner expects 24 input channels, got {x.shape[1]}")
    with torch.no_grad():
        out = nets.refiner(x)
    return out.squeeze(0) if squeeze else out
