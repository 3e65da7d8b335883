"""Keypoint heatmap rendering."""

from __future__ import annotations

import numpy as np
import torch

from ..errors import ContractError
from .types import NUM_KEYPOINTS


def render_pose_map(keypoints, H: int, W: int, sigma: float) -> torch.Tensor:
    """Render 18 keypoints as Gaussian heatmap channels.

    Each visible keypoint produces a Gaussian bump with std `sigma` and peak
    value exactly 1 at the (nearest-pixel) keypoint location; invisible
    keypoints leave an all-zero channel.

    `keypoints` is an iterable of 18 (x, y, visibility) triples; visible
    coordinates must lie inside the image.
    """
    kps = np.asarray(keypoints, dtype=np.float64)
    if kps.shape != (NUM_KEYPOINTS, 3):
        raise ContractError(
            f"expected {NUM_KEYPOINTS} (x, y, visibility) keypoints, got shape {kps.shape}"
        )
    if sigma <= 0:
        raise ContractError("sigma must be positive")

    ys = np.arange(H, dtype=np.float64)[:, None]
    xs = np.arange(W, dtype=np.float64)[None, :]
    out = np.zeros((NUM_KEYPOINTS, H, W), dtype=np.float32)
    for k, (x, y, vis) in enumerate(kps):
        if vis <= 0:
            continue
        if not (0 <= x <= W - 1 and 0 <= y <= H - 1):
            raise ContractError(
                f"keypoint {k} at ({x}, {y}) outside {H}×{W} image but marked visible"
            )
        # Snap to the nearest pixel so the channel max is exactly 1.
        cx, cy = round(float(x)), round(float(y))
        d2 = (xs - cx) ** 2 + (ys - cy) ** 2
        out[k] = np.exp(-d2 / (2.0 * sigma * sigma)).astype(np.float32)
    return torch.from_numpy(out)
