"""Optimizer construction and append-only training logs."""

from __future__ import annotations

import time
from pathlib import Path

import torch


def make_adamw(params, lr: float, weight_decay: float, betas=(0.9, 0.999)):
    return torch.optim.AdamW(params, lr=lr, betas=betas, weight_decay=weight_decay)


def make_adam(params, lr: float, betas=(0.5, 0.99)):
    return torch.optim.Adam(params, lr=lr, betas=betas)


def warmup_scheduler(optimizer, warmup_steps: int):
    """Linear warm-up to the base learning rate, constant afterwards."""

    def factor(step: int) -> float:
        if warmup_steps <= 0:
            return 1.0
        return min(1.0, (step + 1) / warmup_steps)

    return torch.optim.lr_scheduler.LambdaLR(optimizer, factor)


class TrainLog:
    """Append-only line-delimited training log: step, loss, lr, wall time.

    `offset` shifts logged step numbers; a resumed run continues the log at
    the recorded step instead of restarting from one.
    """

    def __init__(self, path: str | Path | None, offset: int = 0):
        self.path = Path(path) if path is not None else None
        self.offset = offset
        self._t0 = time.monotonic()
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, step: int, loss: float, lr: float) -> None:
        if self.path is None:
            return
        wall = time.monotonic() - self._t0
        with self.path.open("a") as f:
            f.write(
                f"step={step + self.offset} loss={loss:.6f} lr={lr:.3e} wall={wall:.2f}\n"
            )


def parse_train_log(path: str | Path) -> list[dict]:
    rows = []
    for line in Path(path).read_text().splitlines():
        row = {}
        for part in line.split():
            key, _, val = part.partition("=")
            row[key] = float(val) if key != "step" else int(val)
        if row:
            rows.append(row)
    return rows


def smoothed_loss(rows: list[dict], step: int, window: int = 25) -> float:
    """Mean loss over the `window` entries at or before `step`."""
    upto = [r["loss"] for r in rows if r["step"] <= step]
    if not upto:
        raise ValueError(f"no log entries at or before step {step}")
    return sum(upto[-window:]) / len(upto[-window:])
