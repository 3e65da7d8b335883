"""Paired / unpaired evaluation protocol and report serialization."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..dataset.manifest import DatasetManifest, load_pair
from ..errors import DataError
from .features import resolve_extractor
from .fid import FeatureSet, fid, kid
from .lpips import lpips
from .ssim import ssim

PAIRED_FIELDS = ("ssim", "lpips", "fid_paired", "kid_paired")
UNPAIRED_FIELDS = ("fid_unpaired", "kid_unpaired")


@dataclass
class MetricsReport:
    setting: str
    n_samples: int
    extractor_id: str
    config_hash: str
    resolution: str
    values: dict[str, float] = field(default_factory=dict)

    def to_kv(self) -> dict:
        out = {
            "setting": self.setting,
            "n_samples": self.n_samples,
            "extractor": self.extractor_id,
            "config_hash": self.config_hash,
            "resolution": self.resolution,
        }
        out.update({k: self.values[k] for k in sorted(self.values)})
        return out

    def write(self, path: str | Path) -> None:
        from ..config import write_kv_file

        write_kv_file(path, self.to_kv())

    def table_row(self) -> str:
        """Machine-readable row: tab-separated key:value pairs, sorted."""
        kv = self.to_kv()
        return "\t".join(f"{k}={kv[k]}" for k in sorted(kv))


def evaluate(
    generator,
    manifest: DatasetManifest,
    setting: str,
    extractor="toy-feat-64",
    config_hash: str = "",
    lpips_backbone="toy-lpips-64",
    record_ids=None,
) -> MetricsReport:
    """Run the evaluation protocol over a test manifest.

    Paired: coherence metrics against ground truth plus feature-distribution
    distances; unpaired: realism (distribution) metrics only.
    """
    if setting not in ("paired", "unpaired"):
        raise DataError(f"setting must be paired or unpaired, got {setting!r}")
    extractor = resolve_extractor(extractor)
    ids = list(record_ids) if record_ids is not None else manifest.record_ids
    if not ids:
        raise DataError("no records to evaluate")

    real_images, fake_images = [], []
    ssim_vals, lpips_vals = [], []
    for rid in ids:
        sample = load_pair(manifest, rid, setting)
        generated = generator(sample)
        if setting == "paired":
            if sample.model_image is None:
                raise DataError(f"record {rid}: paired evaluation needs ground truth")
            ssim_vals.append(ssim(generated, sample.model_image))
            lpips_vals.append(lpips(generated, sample.model_image, lpips_backbone))
        real_images.append(sample.model_image)
        fake_images.append(generated)

    real_set: FeatureSet = extractor.feature_set(real_images)
    fake_set: FeatureSet = extractor.feature_set(fake_images)
    fid_val = fid(real_set, fake_set)
    kid_val = kid(real_set, fake_set, seed=0)

    values: dict[str, float] = {}
    if setting == "paired":
        values["ssim"] = sum(ssim_vals) / len(ssim_vals)
        values["lpips"] = sum(lpips_vals) / len(lpips_vals)
        values["fid_paired"] = fid_val
        values["kid_paired"] = kid_val
    else:
        values["fid_unpaired"] = fid_val
        values["kid_unpaired"] = kid_val

    h, w = real_images[0].shape[-2], real_images[0].shape[-1]
    return MetricsReport(
        setting=setting,
        n_samples=len(ids),
        extractor_id=real_set.extractor_id,
        config_hash=config_hash,
        resolution=f"{h}x{w}",
        values=values,
    )
