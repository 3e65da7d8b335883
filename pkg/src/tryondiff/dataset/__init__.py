from .manifest import DatasetManifest, TryOnDataset, build_manifest, load_all, load_pair
from .masks import AGNOSTIC_FILL, build_inpaint_mask, make_agnostic
from .pose import render_pose_map
from .toy import synth_toy_sample, write_toy_dataset
from .types import (
    CATEGORIES,
    NUM_KEYPOINTS,
    SegLabel,
    TryOnSample,
    check_image,
    check_mask,
    check_pose,
)

__all__ = [
    "AGNOSTIC_FILL",
    "CATEGORIES",
    "DatasetManifest",
    "NUM_KEYPOINTS",
    "SegLabel",
    "TryOnDataset",
    "TryOnSample",
    "build_inpaint_mask",
    "build_manifest",
    "check_image",
    "check_mask",
    "check_pose",
    "load_all",
    "load_pair",
    "make_agnostic",
    "render_pose_map",
    "synth_toy_sample",
    "write_toy_dataset",
]
