from .nets import WarpNets, correlation_map, predict_warp, refine_warp
from .tps import FixedGridTps, TpsParams, control_grid, tps_apply, tps_eval, tps_fit
from .training import WARP_FILL, garment_crop, train_warping

__all__ = [
    "FixedGridTps",
    "TpsParams",
    "WARP_FILL",
    "WarpNets",
    "control_grid",
    "correlation_map",
    "garment_crop",
    "predict_warp",
    "refine_warp",
    "tps_apply",
    "tps_eval",
    "tps_fit",
    "train_warping",
]
