import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).resolve().parent))

from tryondiff.config import RunConfig, get_preset
from tryondiff.dataset import synth_toy_sample, write_toy_dataset

# Collected (criterion, label, status) rows printed in the terminal summary.
ACCEPTANCE_RESULTS: list[tuple[int, str, str]] = []


def record_acceptance(number: int, label: str, passed: bool = True) -> None:
    ACCEPTANCE_RESULTS.append((number, label, "PASS" if passed else "FAIL"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, label, status in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {number:2d} [{label}]: {status}")


@pytest.fixture(scope="session")
def toy_preset():
    return get_preset("toy")


@pytest.fixture(scope="session")
def toy_samples(toy_preset):
    """A small bank of synthetic samples shared by unit tests."""
    return [synth_toy_sample(seed, toy_preset) for seed in range(16)]


@pytest.fixture(scope="session")
def toy_data_root(tmp_path_factory, toy_preset):
    root = tmp_path_factory.mktemp("toydata")
    write_toy_dataset(root, n_train=24, n_test=8, preset=toy_preset)
    return root


def micro_config(data_root, ckpt_root, seed=0) -> RunConfig:
    """Tiny budgets: enough to exercise every code path, not to reach quality."""
    cfg = RunConfig()
    cfg.scale = "toy"
    cfg.seed = seed
    cfg.data.root = str(data_root)
    cfg.checkpoint_root = str(ckpt_root)
    cfg.emasc.backbone_pretrain_steps = 40
    cfg.emasc.backbone_pretrain_lr = 2e-3
    cfg.emasc.steps = 12
    cfg.emasc.batch = 4
    cfg.emasc.lr = 1e-3
    cfg.emasc.warmup = 5
    cfg.adapter.base_pretrain_steps = 12
    cfg.adapter.base_pretrain_lr = 1e-3
    cfg.adapter.steps = 12
    cfg.adapter.batch = 4
    cfg.adapter.lr = 1e-3
    cfg.adapter.warmup = 5
    cfg.warp.epochs = 2
    cfg.warp.batch = 4
    cfg.warp.lr = 2e-4
    cfg.warp.max_steps_phase1 = 12
    cfg.warp.max_steps_phase2 = 12
    cfg.tryon.steps = 12
    cfg.tryon.batch = 4
    cfg.tryon.lr = 1e-3
    cfg.tryon.warmup = 5
    cfg.sample.steps = 4
    cfg.sample.guidance = 2.0
    return cfg


@pytest.fixture(scope="session")
def micro_checkpoints(tmp_path_factory, toy_data_root):
    """All four stages trained at micro budgets; for plumbing tests only."""
    from tryondiff.cli import train_stage

    ckpt_root = tmp_path_factory.mktemp("microckpt")
    cfg = micro_config(toy_data_root, ckpt_root)
    for stage in ("emasc", "adapter", "warp", "tryon"):
        train_stage(cfg, stage)
    return cfg, ckpt_root


@pytest.fixture(autouse=True)
def _single_thread():
    # Keep CPU reductions stable across the suite.
    torch.set_num_threads(max(1, torch.get_num_threads()))
    yield
