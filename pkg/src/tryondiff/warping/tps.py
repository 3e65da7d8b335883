"""Thin-plate-spline fitting and image warping.

`tps_fit` solves the standard interpolation system with kernel
U(r) = r^2 log r^2 by a dense float64 solve with partial pivoting; the fitted
transform reproduces every control-point correspondence and satisfies the
side conditions sum(w) = 0 and sum(w * x_ctrl) = 0 per output dimension.

`FixedGridTps` is the differentiable counterpart used inside the warping
networks: for a fixed source control grid the solve reduces to a constant
precomputed matrix applied to the predicted target points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..errors import ContractError, DegenerateConfigurationError


def _kernel(r2: np.ndarray) -> np.ndarray:
    # U(r) = r^2 log r^2 with U(0) = 0.
    out = np.zeros_like(r2)
    pos = r2 > 0
    out[pos] = r2[pos] * np.log(r2[pos])
    return out


@dataclass
class TpsParams:
    """Affine part plus radial control-point weights of a fitted 2D TPS."""

    affine: np.ndarray           # 2×3, rows apply to [x, y, 1]
    control_weights: np.ndarray  # 2×K
    control_points: np.ndarray   # K×2 source points

    @property
    def grid_size(self) -> int:
        return int(round(len(self.control_points) ** 0.5))

    @classmethod
    def identity(cls, control_points: np.ndarray) -> "TpsParams":
        K = len(control_points)
        return cls(
            affine=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
            control_weights=np.zeros((2, K)),
            control_points=np.asarray(control_points, dtype=np.float64),
        )

    def side_condition_residuals(self) -> tuple[float, float]:
        w = self.control_weights
        r1 = float(np.abs(w.sum(axis=1)).max())
        r2 = float(np.abs(w @ self.control_points).max())
        return r1, r2


def _system_matrix(src: np.ndarray) -> np.ndarray:
    K = len(src)
    d2 = np.sum((src[:, None, :] - src[None, :, :]) ** 2, axis=-1)
    kernel = _kernel(d2)
    P = np.concatenate([src, np.ones((K, 1))], axis=1)  # [x, y, 1]
    L = np.zeros((K + 3, K + 3))
    L[:K, :K] = kernel
    L[:K, K:] = P
    L[K:, :K] = P.T
    return L


def tps_fit(src_pts, dst_pts) -> TpsParams:
    """Fit the TPS mapping src control points onto dst control points."""
    src = np.asarray(src_pts, dtype=np.float64)
    dst = np.asarray(dst_pts, dtype=np.float64)
    if src.ndim != 2 or src.shape[1] != 2 or src.shape != dst.shape:
        raise ContractError(f"expected matching K×2 point arrays, got {src.shape} / {dst.shape}")
    K = len(src)
    if K < 3:
        raise ContractError(f"TPS needs at least 3 control points, got {K}")

    d2 = np.sum((src[:, None, :] - src[None, :, :]) ** 2, axis=-1)
    if np.min(d2 + np.eye(K) * 1e9) < 1e-18:
        raise DegenerateConfigurationError("duplicate control points")
    centered = src - src.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False)
    if svals[-1] < 1e-9 * max(svals[0], 1.0):
        raise DegenerateConfigurationError("control points are collinear")

    L = _system_matrix(src)
    rhs = np.concatenate([dst, np.zeros((3, 2))], axis=0)
    try:
        sol = np.linalg.solve(L, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateConfigurationError(f"singular TPS system: {exc}") from exc

    weights = sol[:K].T                     # 2×K
    abc = sol[K:]                           # rows: x-coef, y-coef, constant
    affine = np.array(
        [[abc[0, 0], abc[1, 0], abc[2, 0]], [abc[0, 1], abc[1, 1], abc[2, 1]]]
    )
    return TpsParams(affine=affine, control_weights=weights, control_points=src)


def tps_eval(params: TpsParams, points) -> np.ndarray:
    """Evaluate the fitted transform at M×2 query points."""
    pts = np.asarray(points, dtype=np.float64)
    ones = np.ones((len(pts), 1))
    hom = np.concatenate([pts, ones], axis=1)           # [x, y, 1]
    out = hom @ params.affine.T                         # M×2
    d2 = np.sum((pts[:, None, :] - params.control_points[None, :, :]) ** 2, axis=-1)
    out += _kernel(d2) @ params.control_weights.T
    return out


def _norm_grid(H: int, W: int) -> np.ndarray:
    ys = np.linspace(-1.0, 1.0, H)
    xs = np.linspace(-1.0, 1.0, W)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def tps_apply(image: torch.Tensor, params: TpsParams, out_dims: tuple[int, int],
              fill: float = -1.0) -> torch.Tensor:
    """Warp an image: each output pixel bilinearly samples the TPS-mapped
    source location (normalized [-1, 1] coordinates); out-of-bounds samples
    take the constant background fill."""
    squeeze = image.dim() == 3
    img = image.unsqueeze(0) if squeeze else image
    H2, W2 = out_dims
    src_norm = tps_eval(params, _norm_grid(H2, W2))
    grid = torch.from_numpy(src_norm.reshape(1, H2, W2, 2))
    grid = grid.expand(img.shape[0], -1, -1, -1)
    # Double precision keeps grid-aligned samples exact (no bilinear bleed).
    shifted = img.double() - fill
    warped = F.grid_sample(shifted, grid, mode="bilinear", padding_mode="zeros",
                           align_corners=True)
    out = (warped + fill).to(img.dtype)
    return out.squeeze(0) if squeeze else out


def control_grid(g: int) -> np.ndarray:
    """Regular g×g control grid over [-1, 1]² (K = g² points)."""
    axis = np.linspace(-1.0, 1.0, g)
    gx, gy = np.meshgrid(axis, axis)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


class FixedGridTps(torch.nn.Module):
    """Differentiable TPS warp for a fixed source control grid.

    With the source grid fixed, solving the interpolation system is a linear
    map of the target points: params = L^{-1} [dst; 0]. Both that matrix and
    the kernel features of the output pixel grid are precomputed, so the warp
    is differentiable in the predicted target points.
    """

    def __init__(self, grid_size: int, out_dims: tuple[int, int], fill: float = -1.0):
        super().__init__()
        self.grid_size = grid_size
        self.out_dims = out_dims
        self.fill = fill
        src = control_grid(grid_size)
        K = len(src)
        L_inv = np.linalg.inv(_system_matrix(src))
        pts = _norm_grid(*out_dims)
        d2 = np.sum((pts[:, None, :] - src[None, :, :]) ** 2, axis=-1)
        phi = np.concatenate([_kernel(d2), pts, np.ones((len(pts), 1))], axis=1)
        self.register_buffer("src", torch.from_numpy(src).double())
        self.register_buffer("l_inv", torch.from_numpy(L_inv).double())
        self.register_buffer("phi", torch.from_numpy(phi).double())

    def source_coords(self, dst: torch.Tensor) -> torch.Tensor:
        """dst: (B, K, 2) target control points → (B, H·W, 2) source coords."""
        B, K, _ = dst.shape
        rhs = torch.cat([dst.double(), dst.new_zeros(B, 3, 2).double()], dim=1)
        params = self.l_inv @ rhs            # (B, K+3, 2)
        return (self.phi @ params).float()   # (B, HW, 2)

    def forward(self, image: torch.Tensor, dst: torch.Tensor) -> torch.Tensor:
        H2, W2 = self.out_dims
        grid = self.source_coords(dst).reshape(-1, H2, W2, 2)
        shifted = image - self.fill
        warped = F.grid_sample(shifted, grid, mode="bilinear", padding_mode="zeros",
                               align_corners=True)
        return warped + self.fill
