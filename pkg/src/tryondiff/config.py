"""Run configuration: scale presets, hyperparameters, and the key-value file format.

Config files are plain text, one `dotted.key = value` per line, `#` comments
allowed. CLI flags override file values. Every artifact produced by a run
embeds the sha256 hash of the canonical serialization.
"""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class ScalePreset:
    name: str
    height: int
    width: int
    pose_sigma: float
    mask_margin: int

    @property
    def latent_h(self) -> int:
        return self.height // 8

    @property
    def latent_w(self) -> int:
        return self.width // 8


# Image sizes per the two operating points; latent factor is fixed at 8.
# Mask margin / pose sigma scale proportionally with height (8 px and 3 px
# at the 512-tall full preset), clamped to stay usable at 64 px.
PRESETS: dict[str, ScalePreset] = {
    "full": ScalePreset("full", 512, 384, pose_sigma=3.0, mask_margin=8),
    "toy": ScalePreset("toy", 64, 48, pose_sigma=1.0, mask_margin=1),
}


def get_preset(name: str) -> ScalePreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown scale preset {name!r}; choose from {sorted(PRESETS)}")


@dataclass
class DataConfig:
    root: str = ""
    layout: str = "toy"          # toy | dresscode | vitonhd
    category: str = "upper"      # upper | lower | dress | all


@dataclass
class ScheduleConfig:
    T: int = 1000
    kind: str = "scaled_linear"  # scaled_linear | linear


@dataclass
class EmascConfig:
    steps: int = 40000
    batch: int = 16
    lr: float = 1e-5
    warmup: int = 500
    weight_decay: float = 1e-2
    perceptual_weight: float = 0.5
    variant: str = "nonlinear"   # none | linear | nonlinear
    masked: bool = True
    # Toy-scale only: pretrain the latent autoencoder backbone before EMASC
    # training (0 = expect a checkpoint, the full-scale path).
    backbone_pretrain_steps: int = 0
    backbone_pretrain_lr: float = 2e-3


@dataclass
class AdapterConfig:
    steps: int = 200000
    batch: int = 16
    lr: float = 1e-5
    warmup: int = 500
    weight_decay: float = 1e-2
    num_ptes: int = 16
    mlp_dropout: float = 0.1
    visual_encoder: str = "toy-vis-32"
    text_encoder: str = "toy-text-32"
    prompt_template: str = "a photo of a model wearing"
    # Toy-scale only: pretrain the 9-channel inpainting denoiser the adapter
    # trains against (0 = expect a checkpoint).
    base_pretrain_steps: int = 0
    base_pretrain_lr: float = 1e-3


@dataclass
class WarpConfig:
    epochs: int = 50
    batch: int = 32
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.99
    perceptual_weight: float = 0.25
    grid: int = 5
    # Optional hard caps on optimizer steps per phase; 0 = run full epochs.
    max_steps_phase1: int = 0
    max_steps_phase2: int = 0


@dataclass
class TryonConfig:
    steps: int = 200000
    batch: int = 16
    lr: float = 1e-5
    warmup: int = 500
    weight_decay: float = 1e-2
    cond_dropout: float = 0.2


@dataclass
class SampleConfig:
    steps: int = 50
    guidance: float = 7.5
    paste_background: bool = False


@dataclass
class AblateConfig:
    no_text: bool = False
    no_warp: bool = False
    text_override: str = ""
    emasc_variant: str = ""      # empty = use trained checkpoint variant


@dataclass
class RunConfig:
    scale: str = "full"
    seed: int = 0
    checkpoint_root: str = ""
    data: DataConfig = field(default_factory=DataConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    emasc: EmascConfig = field(default_factory=EmascConfig)
    adapter: AdapterConfig = field(default_factory=AdapterConfig)
    warp: WarpConfig = field(default_factory=WarpConfig)
    tryon: TryonConfig = field(default_factory=TryonConfig)
    sample: SampleConfig = field(default_factory=SampleConfig)
    ablate: AblateConfig = field(default_factory=AblateConfig)

    @property
    def preset(self) -> ScalePreset:
        return get_preset(self.scale)

    # -- flat key-value view -------------------------------------------------

    def to_flat(self) -> dict[str, object]:
        out: dict[str, object] = {}

        def walk(prefix: str, obj) -> None:
            for f in fields(obj):
                val = getattr(obj, f.name)
                key = f"{prefix}{f.name}"
                if dataclasses.is_dataclass(val):
                    walk(key + ".", val)
                else:
                    out[key] = val

        walk("", self)
        return out

    def set_key(self, key: str, raw) -> None:
        """Set a dotted key, coercing `raw` to the declared field type."""
        obj = self
        parts = key.split(".")
        for part in parts[:-1]:
            if not hasattr(obj, part):
                raise ConfigError(f"unknown config section {part!r} in key {key!r}")
            obj = getattr(obj, part)
            if not dataclasses.is_dataclass(obj):
                raise ConfigError(f"{key!r} indexes into a non-section value")
        name = parts[-1]
        match = [f for f in fields(obj) if f.name == name]
        if not match:
            raise ConfigError(f"unknown config key {key!r}")
        ftype = match[0].type
        setattr(obj, name, _coerce(raw, ftype, key))

    def config_hash(self) -> str:
        flat = self.to_flat()
        canon = "\n".join(f"{k} = {_format_value(flat[k])}" for k in sorted(flat))
        return hashlib.sha256(canon.encode()).hexdigest()

    # -- file IO ---------------------------------------------------------------

    def save(self, path: str | Path) -> None:
        flat = self.to_flat()
        lines = [f"{k} = {_format_value(flat[k])}" for k in sorted(flat)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        cfg = cls()
        for key, raw in parse_kv_file(path).items():
            cfg.set_key(key, raw)
        return cfg


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(raw, ftype, key: str):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if ftype in ("bool", bool):
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"cannot parse boolean from {text!r} for key {key!r}")
    if ftype in ("int", int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"cannot parse integer from {text!r} for key {key!r}")
    if ftype in ("float", float):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"cannot parse float from {text!r} for key {key!r}")
    if text and text[0] == text[-1] and text[0] in ("'", '"'):
        return text[1:-1]
    return text


def parse_kv_file(path: str | Path) -> dict[str, str]:
    """Parse a plain-text hierarchical key-value file into dotted keys."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def write_kv_file(path: str | Path, mapping: dict[str, object]) -> None:
    lines = [f"{k} = {_format_value(mapping[k])}" for k in sorted(mapping)]
    Path(path).write_text("\n".join(lines) + "\n")
