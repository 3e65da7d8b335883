"""Stage checkpoint persistence: a directory per stage with a manifest and
per-module weight blobs. Manifests record the stage, weight-file hashes, the
config hash, and companion-checkpoint hashes; hashes are verified on load and
stage compatibility is enforced."""

from __future__ import annotations

import datetime
import hashlib
import json
from pathlib import Path

import torch

from .errors import CheckpointError

STAGES = ("emasc", "adapter", "warp", "tryon")
MANIFEST_NAME = "manifest.json"


def _file_hash(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_checkpoint(
    directory: str | Path,
    stage: str,
    config_hash: str,
    modules: dict[str, torch.nn.Module],
    extra: dict | None = None,
    companions: dict[str, str] | None = None,
    step: int = 0,
    optimizer_state: dict | None = None,
) -> Path:
    if stage not in STAGES:
        raise CheckpointError(f"unknown stage {stage!r}")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    weights = {}
    for name, module in modules.items():
        blob = directory / f"{name}.pt"
        torch.save(module.state_dict(), blob)
        weights[name] = {"file": blob.name, "sha256": _file_hash(blob)}
    if optimizer_state is not None:
        blob = directory / "optimizer.pt"
        torch.save(optimizer_state, blob)
        weights["optimizer"] = {"file": blob.name, "sha256": _file_hash(blob)}

    manifest = {
        "stage": stage,
        "config_hash": config_hash,
        "weights": weights,
        "companions": companions or {},
        "step": step,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "extra": extra or {},
    }
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return directory


def read_manifest(directory: str | Path, expect_stage: str | None = None) -> dict:
    directory = Path(directory)
    path = directory / MANIFEST_NAME
    if not path.exists():
        raise CheckpointError(f"no checkpoint manifest at {path}")
    manifest = json.loads(path.read_text())
    if expect_stage is not None and manifest.get("stage") != expect_stage:
        raise CheckpointError(
            f"checkpoint at {directory} is stage {manifest.get('stage')!r}, "
            f"expected {expect_stage!r}"
        )
    return manifest


def checkpoint_hash(directory: str | Path) -> str:
    """Hash of the manifest file, used as the companion fingerprint."""
    return _file_hash(Path(directory) / MANIFEST_NAME)


def load_weights(directory: str | Path, manifest: dict, name: str,
                 module: torch.nn.Module) -> torch.nn.Module:
    directory = Path(directory)
    entry = manifest["weights"].get(name)
    if entry is None:
        raise CheckpointError(f"checkpoint has no weight blob named {name!r}")
    blob = directory / entry["file"]
    if not blob.exists():
        raise CheckpointError(f"missing weight blob {blob}")
    if _file_hash(blob) != entry["sha256"]:
        raise CheckpointError(f"hash mismatch for {blob}; checkpoint is corrupt")
    module.load_state_dict(torch.load(blob, weights_only=True))
    return module


def load_blob(directory: str | Path, manifest: dict, name: str):
    directory = Path(directory)
    entry = manifest["weights"].get(name)
    if entry is None:
        return None
    blob = directory / entry["file"]
    if _file_hash(blob) != entry["sha256"]:
        raise CheckpointError(f"hash mismatch for {blob}; checkpoint is corrupt")
    return torch.load(blob, weights_only=True)
