import pytest

from tryondiff.config import PRESETS, RunConfig, get_preset, parse_kv_file, write_kv_file
from tryondiff.errors import ConfigError


def test_presets_latent_factor():
    full = get_preset("full")
    toy = get_preset("toy")
    assert (full.height, full.width) == (512, 384)
    assert (full.latent_h, full.latent_w) == (64, 48)
    assert (toy.height, toy.width) == (64, 48)
    assert (toy.latent_h, toy.latent_w) == (8, 6)


def test_unknown_preset():
    with pytest.raises(ConfigError):
        get_preset("medium")


# Literal hyperparameter table the defaults must match.
PAPER_DEFAULTS = {
    "emasc.steps": 40000,
    "emasc.batch": 16,
    "emasc.lr": 1e-5,
    "emasc.warmup": 500,
    "emasc.weight_decay": 1e-2,
    "emasc.perceptual_weight": 0.5,
    "adapter.steps": 200000,
    "adapter.batch": 16,
    "adapter.lr": 1e-5,
    "adapter.warmup": 500,
    "adapter.weight_decay": 1e-2,
    "adapter.num_ptes": 16,
    "warp.epochs": 50,
    "warp.batch": 32,
    "warp.lr": 1e-4,
    "warp.beta1": 0.5,
    "warp.beta2": 0.99,
    "warp.perceptual_weight": 0.25,
    "tryon.steps": 200000,
    "tryon.batch": 16,
    "tryon.lr": 1e-5,
    "tryon.warmup": 500,
    "tryon.weight_decay": 1e-2,
    "tryon.cond_dropout": 0.2,
}


def test_defaults_match_reference_table():
    flat = RunConfig().to_flat()
    for key, expected in PAPER_DEFAULTS.items():
        assert flat[key] == expected, key


def test_roundtrip_and_hash(tmp_path):
    cfg = RunConfig()
    cfg.scale = "toy"
    cfg.tryon.steps = 123
    path = tmp_path / "run.kv"
    cfg.save(path)
    loaded = RunConfig.load(path)
    assert loaded.to_flat() == cfg.to_flat()
    assert loaded.config_hash() == cfg.config_hash()

    loaded.set_key("sample.guidance", "3.5")
    assert loaded.config_hash() != cfg.config_hash()


def test_kv_file_comments_and_errors(tmp_path):
    path = tmp_path / "c.kv"
    path.write_text("# comment\nscale = toy  # trailing\n\nseed = 7\n")
    kv = parse_kv_file(path)
    assert kv == {"scale": "toy", "seed": "7"}

    bad = tmp_path / "bad.kv"
    bad.write_text("not a pair\n")
    with pytest.raises(ConfigError):
        parse_kv_file(bad)
    with pytest.raises(ConfigError):
        parse_kv_file(tmp_path / "missing.kv")


def test_set_key_coercion_and_unknown():
    cfg = RunConfig()
    cfg.set_key("emasc.masked", "false")
    assert cfg.emasc.masked is False
    cfg.set_key("tryon.lr", "3e-4")
    assert cfg.tryon.lr == pytest.approx(3e-4)
    with pytest.raises(ConfigError):
        cfg.set_key("emasc.bogus", "1")
    with pytest.raises(ConfigError):
        cfg.set_key("nonexistent.key", "1")
    with pytest.raises(ConfigError):
        cfg.set_key("tryon.steps", "not-a-number")


def test_write_kv_file_roundtrip(tmp_path):
    path = tmp_path / "m.kv"
    write_kv_file(path, {"b": 2, "a": "x", "flag": True})
    kv = parse_kv_file(path)
    assert kv == {"a": "x", "b": "2", "flag": "true"}


def test_config_hash_covers_every_key():
    cfg = RunConfig()
    base = cfg.config_hash()
    for key in list(cfg.to_flat()):
        other = RunConfig()
        flat = other.to_flat()
        current = flat[key]
        if isinstance(current, bool):
            other.set_key(key, "false" if current else "true")
        elif isinstance(current, int):
            other.set_key(key, str(current + 1))
        elif isinstance(current, float):
            other.set_key(key, str(current + 0.5))
        else:
            other.set_key(key, str(current) + "_x")
        assert other.config_hash() != base, key
