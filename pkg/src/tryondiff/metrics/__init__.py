from .evaluate import MetricsReport, evaluate
from .features import ToyFeatureExtractor, register_extractor, resolve_extractor
from .fid import FeatureSet, fid, kid, mmd2_unbiased
from .lpips import lpips, register_lpips_backbone
from .ssim import ssim

__all__ = [
    "FeatureSet",
    "MetricsReport",
    "ToyFeatureExtractor",
    "evaluate",
    "fid",
    "kid",
    "lpips",
    "mmd2_unbiased",
    "register_extractor",
    "register_lpips_backbone",
    "resolve_extractor",
    "ssim",
]
