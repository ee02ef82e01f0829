"""Three-term self-supervised objective and the pair-sampling training loop."""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .clips import VideoClip, sample_training_pair
from .errors import EmptyBatch, InvalidConfig, NonFiniteLoss
from .model import ArchConfig, SceneModel, batch_to_tensor, build_model, save_checkpoint


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 20000
    batch_size: int = 16
    learning_rate: float = 2e-4
    alpha_equiv: float = 1.0
    alpha_inv: float = 1.0
    seed: int = 0
    log_every: int = 1
    checkpoint_every: int = 2000
    symmetric_scene: bool = False  # extension: also map x2 -> x1; off per the one-sided objective
    num_threads: int | None = None

    def validate(self) -> None:
        if self.steps < 1 or self.batch_size < 1:
            raise InvalidConfig("steps and batch_size must be positive")
        if self.alpha_equiv < 0 or self.alpha_inv < 0:
            raise InvalidConfig("loss weights must be non-negative")

    def to_json(self) -> dict:
        return {
            "steps": self.steps,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "alpha_equiv": self.alpha_equiv,
            "alpha_inv": self.alpha_inv,
            "seed": self.seed,
            "log_every": self.log_every,
            "checkpoint_every": self.checkpoint_every,
            "symmetric_scene": self.symmetric_scene,
        }


def _mse(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    if a.shape != b.shape:
        from .errors import ShapeMismatch

        raise ShapeMismatch(f"shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    return torch.mean((a - b) ** 2)


def scene_loss(model: SceneModel, x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
    """Per-element MSE of h(x1, x1, x2, x1) against x2."""
    return _mse(model.compose(x1, x1, x2, x1), x2)


def equivariance_loss(model: SceneModel, x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
    """Per-element MSE between the warped encoding of x1 and the encoding of x2."""
    z1 = model.encode_character(x1)
    z2 = model.encode_character(x2)
    theta = model.predict_transform(z1, z2)
    return _mse(model.apply_transform(theta, z1), z2)


def invariance_loss(model: SceneModel, x1: torch.Tensor, x2: torch.Tensor) -> torch.Tensor:
    """Per-element MSE between the two background encodings."""
    return _mse(model.encode_background(x1), model.encode_background(x2))


def loss_terms(model: SceneModel, x1: torch.Tensor, x2: torch.Tensor) -> dict[str, torch.Tensor]:
    """All three terms from shared encodings (identical values, one encoder pass each)."""
    z1c = model.encode_character(x1)
    z2c = model.encode_character(x2)
    z1b = model.encode_background(x1)
    z2b = model.encode_background(x2)
    theta = model.predict_transform(z1c, z2c)
    warped = model.apply_transform(theta, z1c)
    terms = {
        "scene": _mse(model.decode(warped + z1b), x2),
        "equiv": _mse(warped, z2c),
        "inv": _mse(z1b, z2b),
    }
    return terms


def total_loss(
    model: SceneModel, x1: torch.Tensor, x2: torch.Tensor, cfg: TrainConfig
) -> tuple[torch.Tensor, dict[str, float]]:
    """Weighted sum over the batch, with a per-term breakdown for logging."""
    if x1.shape[0] == 0:
        raise EmptyBatch("empty batch")
    terms = loss_terms(model, x1, x2)
    total = terms["scene"] + cfg.alpha_equiv * terms["equiv"] + cfg.alpha_inv * terms["inv"]
    if cfg.symmetric_scene:
        reverse = loss_terms(model, x2, x1)
        total = 0.5 * (
            total
            + reverse["scene"]
            + cfg.alpha_equiv * reverse["equiv"]
            + cfg.alpha_inv * reverse["inv"]
        )
    breakdown = {f"l_{k}": float(v.detach()) for k, v in terms.items()}
    breakdown["l_total"] = float(total.detach())
    return total, breakdown


def make_batch(
    clips: list[VideoClip], batch_size: int, rng: np.random.Generator
) -> tuple[torch.Tensor, torch.Tensor]:
    """Sample clips uniformly with replacement, one frame pair per batch element."""
    if not clips:
        raise EmptyBatch("no clips to sample from")
    x1s, x2s = [], []
    for _ in range(batch_size):
        clip = clips[int(rng.integers(0, len(clips)))]
        pair = sample_training_pair(clip, rng)
        x1s.append(pair.x1)
        x2s.append(pair.x2)
    return batch_to_tensor(x1s), batch_to_tensor(x2s)


def train(
    cfg: TrainConfig,
    arch: ArchConfig,
    clips: list[VideoClip],
    out_dir: str | Path,
) -> Path:
    """Run the loop; returns the final checkpoint path.

    Writes train_log.jsonl (one record per step) and rolling/final checkpoints
    under out_dir. Aborts with NonFiniteLoss and a diagnostic dump if any term
    goes non-finite.
    """
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.num_threads:
        torch.set_num_threads(cfg.num_threads)

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 7]))
    model = build_model(arch, cfg.seed)
    model.train()
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)

    (out / "train_config.json").write_text(
        json.dumps({"train": cfg.to_json(), "arch": arch.to_json()}, indent=2)
    )

    log_path = out / "train_log.jsonl"
    final_path = out / "checkpoint_final.pt"
    rolling_path = out / "checkpoint.pt"
    start = time.time()
    with open(log_path, "w") as log:
        for step in range(1, cfg.steps + 1):
            x1, x2 = make_batch(clips, cfg.batch_size, rng)
            total, breakdown = total_loss(model, x1, x2, cfg)
            if not math.isfinite(breakdown["l_total"]):
                dump = out / "abort_dump.pt"
                torch.save(
                    {"step": step, "state_dict": model.state_dict(), "x1": x1, "x2": x2}, dump
                )
                raise NonFiniteLoss(f"non-finite loss at step {step}; state dumped to {dump}")
            optimizer.zero_grad()
            total.backward()
            optimizer.step()

            if step % cfg.log_every == 0 or step == cfg.steps:
                record = {"step": step, **breakdown, "elapsed_s": round(time.time() - start, 3)}
                log.write(json.dumps(record) + "\n")
            if cfg.checkpoint_every and step % cfg.checkpoint_every == 0:
                save_checkpoint(model, rolling_path, extra={"step": step})

    save_checkpoint(model, final_path, extra={"step": cfg.steps, "train": cfg.to_json()})
    return final_path


def read_log(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def smoothed_scene_loss(records: list[dict], window: int = 100) -> np.ndarray:
    """Moving average of l_scene over a step window."""
    vals = np.asarray([r["l_scene"] for r in records], dtype=np.float64)
    if len(vals) < window:
        return vals
    kernel = np.ones(window) / window
    return np.convolve(vals, kernel, mode="valid")
