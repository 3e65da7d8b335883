"""Dataset manifests and record loading for the supported directory layouts.

Supported layouts:
  toy       — the synthetic dataset written by `write_toy_dataset`
  dresscode — per-category folders with images/, skeletons/, label_maps/
  vitonhd   — single upper-body category, same folder structure

Layouts share the pairs-file convention: `{split}_pairs_{pairing}.txt` with
two whitespace-separated id columns (model id, garment id). The unpaired
assignment is a fixed permutation loaded from that file, never re-sampled.
File patterns are configurable through the layout.kv manifest file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..config import ScalePreset, get_preset, parse_kv_file
from ..errors import ContractError, DataError, IngestionError, KeypointParseError
from .masks import build_inpaint_mask, make_agnostic
from .pose import render_pose_map
from .toy import u8_to_float
from .types import NUM_KEYPOINTS, TryOnSample

DEFAULT_PATTERNS = {
    "image": "images/{id}_0.png",
    "garment": "images/{id}_1.png",
    "keypoints": "skeletons/{id}.txt",
    "labels": "label_maps/{id}.png",
    "pairs": "{split}_pairs_{pairing}.txt",
}


@dataclass
class RecordRef:
    record_id: str
    image: Path
    garment: Path
    labels: Path
    category: str
    keypoints: Path | None = None   # toy stores keypoints in the meta file
    meta: Path | None = None


@dataclass
class DatasetManifest:
    root: Path
    split: str
    layout: str
    preset: ScalePreset
    records: dict[str, RecordRef] = field(default_factory=dict)
    paired: dict[str, str] = field(default_factory=dict)
    unpaired: dict[str, str] = field(default_factory=dict)

    @property
    def record_ids(self) -> list[str]:
        return sorted(self.records.keys())


def build_manifest(root: str | Path, split: str, preset: ScalePreset | None = None) -> DatasetManifest:
    root = Path(root)
    if split not in ("train", "test"):
        raise ContractError(f"split must be train or test, got {split!r}")
    layout_file = root / "layout.kv"
    kv = parse_kv_file(layout_file) if layout_file.exists() else {}
    layout = kv.get("layout", "toy")
    if preset is None:
        preset = get_preset(kv.get("scale", "full" if layout != "toy" else "toy"))

    manifest = DatasetManifest(root=root, split=split, layout=layout, preset=preset)
    if layout == "toy":
        _scan_toy(manifest)
    elif layout in ("dresscode", "vitonhd"):
        _scan_folders(manifest, kv)
    else:
        raise DataError(f"unknown dataset layout {layout!r}")
    _load_pairs(manifest, kv)
    return manifest


def _scan_toy(manifest: DatasetManifest) -> None:
    rec_dir = manifest.root / "records"
    if not rec_dir.is_dir():
        raise IngestionError(f"toy dataset has no records directory: {rec_dir}")
    pairs = manifest.root / f"{manifest.split}_pairs_paired.txt"
    if not pairs.exists():
        raise IngestionError(f"missing pairs file: {pairs}")
    for line in pairs.read_text().splitlines():
        if not line.strip():
            continue
        rid = line.split()[0]
        meta = rec_dir / f"{rid}_meta.kv"
        category = parse_kv_file(meta).get("category", "upper") if meta.exists() else "upper"
        manifest.records[rid] = RecordRef(
            record_id=rid,
            image=rec_dir / f"{rid}_image.png",
            garment=rec_dir / f"{rid}_garment.png",
            labels=rec_dir / f"{rid}_labels.png",
            category=category,
            meta=meta,
        )


def _scan_folders(manifest: DatasetManifest, kv: dict) -> None:
    patterns = {k: kv.get(f"{k}_pattern", v) for k, v in DEFAULT_PATTERNS.items()}
    if manifest.layout == "vitonhd":
        categories = {".": "upper"}
    else:
        names = kv.get("categories", "upper lower dress").split()
        categories = {n: n for n in names}
    for folder, category in categories.items():
        base = manifest.root / folder
        pairs = base / patterns["pairs"].format(split=manifest.split, pairing="paired")
        if not pairs.exists():
            continue
        for line in pairs.read_text().splitlines():
            if not line.strip():
                continue
            rid = line.split()[0]
            manifest.records[rid] = RecordRef(
                record_id=rid,
                image=base / patterns["image"].format(id=rid),
                garment=base / patterns["garment"].format(id=rid),
                labels=base / patterns["labels"].format(id=rid),
                keypoints=base / patterns["keypoints"].format(id=rid),
                category=category,
            )


def _load_pairs(manifest: DatasetManifest, kv: dict) -> None:
    pattern = kv.get("pairs_pattern", DEFAULT_PATTERNS["pairs"])
    if manifest.layout == "toy":
        bases = [manifest.root]
    elif manifest.layout == "vitonhd":
        bases = [manifest.root]
    else:
        bases = [manifest.root / c for c in kv.get("categories", "upper lower dress").split()]
    for pairing, table in (("paired", manifest.paired), ("unpaired", manifest.unpaired)):
        for base in bases:
            path = base / pattern.format(split=manifest.split, pairing=pairing)
            if not path.exists():
                continue
            for line in path.read_text().splitlines():
                parts = line.split()
                if len(parts) >= 2:
                    table[parts[0]] = parts[1]
    for rid in manifest.records:
        manifest.paired.setdefault(rid, rid)


def _read_image(path: Path) -> torch.Tensor:
    from PIL import Image

    if not path.exists():
        raise IngestionError(f"missing dataset file: {path}")
    arr = np.asarray(Image.open(path).convert("RGB"))
    t = u8_to_float(arr)
    if t.shape[1] % 8 or t.shape[2] % 8:
        raise DataError(f"{path}: image dims {tuple(t.shape[1:])} not divisible by 8")
    return t


def _read_labels(path: Path) -> torch.Tensor:
    from PIL import Image

    if not path.exists():
        raise IngestionError(f"missing dataset file: {path}")
    return torch.from_numpy(np.asarray(Image.open(path)).astype(np.int64))


def _read_keypoints(ref: RecordRef) -> np.ndarray:
    if ref.meta is not None:
        if not ref.meta.exists():
            raise IngestionError(f"missing dataset file: {ref.meta}")
        kv = parse_kv_file(ref.meta)
        rows = []
        for k in range(NUM_KEYPOINTS):
            raw = kv.get(f"kp.{k:02d}")
            if raw is None:
                raise KeypointParseError(f"record {ref.record_id}: missing keypoint {k}")
            parts = raw.split()
            if len(parts) != 3:
                raise KeypointParseError(
                    f"record {ref.record_id}: keypoint {k} needs 'x y v', got {raw!r}"
                )
            rows.append([float(p) for p in parts])
        return np.array(rows, dtype=np.float32)

    path = ref.keypoints
    if path is None or not path.exists():
        raise IngestionError(f"missing dataset file: {path}")
    rows = []
    for line in path.read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 3:
            raise KeypointParseError(
                f"record {ref.record_id}: keypoint line {line!r} needs 'x y v'"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise KeypointParseError(
                f"record {ref.record_id}: non-numeric keypoint line {line!r}"
            )
    if len(rows) != NUM_KEYPOINTS:
        raise KeypointParseError(
            f"record {ref.record_id}: expected {NUM_KEYPOINTS} keypoints, got {len(rows)}"
        )
    return np.array(rows, dtype=np.float32)


def load_pair(manifest: DatasetManifest, record_id: str, pairing: str) -> TryOnSample:
    """Load one fully populated sample; `pairing` selects the garment source."""
    if pairing not in ("paired", "unpaired"):
        raise ContractError(f"pairing must be paired or unpaired, got {pairing!r}")
    ref = manifest.records.get(record_id)
    if ref is None:
        raise IngestionError(f"record {record_id!r} not in manifest for split {manifest.split}")

    table = manifest.paired if pairing == "paired" else manifest.unpaired
    garment_id = table.get(record_id)
    if garment_id is None:
        raise DataError(f"no {pairing} assignment for record {record_id!r}")
    garment_ref = manifest.records.get(garment_id)
    if garment_ref is None:
        raise IngestionError(f"assigned garment record {garment_id!r} not in manifest")

    image = _read_image(ref.image)
    garment = _read_image(garment_ref.garment)
    seg = _read_labels(ref.labels)
    keypoints = _read_keypoints(ref)

    H, W = image.shape[1], image.shape[2]
    mask = build_inpaint_mask(seg, ref.category, margin=manifest.preset.mask_margin)
    pose = render_pose_map(keypoints, H, W, manifest.preset.pose_sigma)
    agnostic = make_agnostic(image, mask)

    return TryOnSample(
        model_image=image,
        garment=garment,
        mask=mask,
        pose=pose,
        agnostic=agnostic,
        category=ref.category,
        pairing=pairing,
        record_id=record_id,
        garment_id=garment_id,
        segmentation=seg,
        keypoints=torch.from_numpy(keypoints),
    )


def load_all(manifest: DatasetManifest, pairing: str = "paired") -> list[TryOnSample]:
    """Materialize every record of a manifest (toy-scale training keeps the
    whole split in memory)."""
    return [load_pair(manifest, rid, pairing) for rid in manifest.record_ids]


class TryOnDataset(torch.utils.data.Dataset):
    """Indexable view over a manifest for training loops."""

    def __init__(self, manifest: DatasetManifest, pairing: str = "paired"):
        self.manifest = manifest
        self.pairing = pairing
        self.ids = manifest.record_ids

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, idx: int) -> TryOnSample:
        return load_pair(self.manifest, self.ids[idx], self.pairing)
