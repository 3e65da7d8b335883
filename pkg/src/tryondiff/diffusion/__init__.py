from .conditioning import (
    CHANNEL_LAYOUT_FULL,
    CHANNEL_LAYOUT_INPAINT,
    ConditioningBundle,
    SpatialInput,
    apply_spatial_dropout,
    assemble_spatial_input,
    cfg_combine,
    condition_dropout,
)
from .denoiser import (
    TryOnDenoiser,
    extend_denoiser_input,
    extend_input_conv,
    predict_noise,
)
from .pipeline import TryOnPipeline
from .sampler import sample, timestep_subsequence
from .schedule import ScheduleTable, add_noise, build_schedule
from .training import (
    encode_scaled,
    pose_to_latent,
    pretrain_inpainting,
    train_tryon,
)

__all__ = [
    "CHANNEL_LAYOUT_FULL",
    "CHANNEL_LAYOUT_INPAINT",
    "ConditioningBundle",
    "ScheduleTable",
    "SpatialInput",
    "TryOnDenoiser",
    "TryOnPipeline",
    "add_noise",
    "apply_spatial_dropout",
    "assemble_spatial_input",
    "build_schedule",
    "cfg_combine",
    "condition_dropout",
    "encode_scaled",
    "extend_denoiser_input",
    "extend_input_conv",
    "pose_to_latent",
    "predict_noise",
    "pretrain_inpainting",
    "sample",
    "timestep_subsequence",
    "train_tryon",
]
