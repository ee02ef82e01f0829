"""Quantitative protocols: manipulation MSE vs. baselines, sprite analogies, masked MSE."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import affine
from .backgrounds import BackgroundSpec, generate_backgrounds, render_background
from .clips import DatasetConfig, VideoClip, compose_frame, composite_sprite, digit_in_bounds, generate_clip
from .digits import DigitPool
from .errors import (
    AssetsUnavailable,
    EmptyInput,
    EmptyRegion,
    InvalidConfig,
    MissingBackgroundRender,
    MissingGroundTruth,
    RetriesExhausted,
)
from .images import quantize8
from .model import SceneModel, batch_to_tensor, tensor_to_image

PROTOCOLS = (
    "transformation",
    "background",
    "video_frames",
    "no_object",
    "analogy",
    "background_only",
    "character_only",
)

SPRITE_CATEGORIES = ("spellcast", "thrust", "walk", "slash", "shoot")


@dataclass(frozen=True)
class EvalRecord:
    protocol: str
    mse: float
    category: str | None = None
    source_ids: tuple = ()


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    median: float
    q1: float
    q3: float
    whisker_lo: float
    whisker_hi: float


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        from .errors import ShapeMismatch

        raise ShapeMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def masked_mse(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray, region: str) -> float:
    """MSE over the mask (region="character") or its complement (region="background")."""
    if region not in ("character", "background"):
        raise InvalidConfig(f"region must be character|background, got {region!r}")
    selected = np.asarray(mask, dtype=bool)
    if region == "background":
        selected = ~selected
    if not selected.any():
        raise EmptyRegion(f"no pixels selected for region {region!r}")
    diff = (np.asarray(pred, dtype=np.float64) - np.asarray(gt, dtype=np.float64)) ** 2
    return float(diff[selected].mean())


@dataclass
class PairedExample:
    """Two independently drawn (background, character) sequences plus a shared index pair."""

    clip1: VideoClip
    clip2: VideoClip
    i: int
    j: int


def build_paired_eval_set(
    config: DatasetConfig,
    digit_pool: DigitPool,
    n: int,
    seed: int,
    split: str = "test",
    max_retries: int = 100,
) -> list[PairedExample]:
    """Draw n examples of clip pairs with a shared (i, j) position.

    Rejection keeps the cross-applied transform (sequence 1's i->j motion on
    sequence 2's character) renderable in-bounds, so manipulation ground truth
    always exists.
    """
    config.validate()
    backgrounds = generate_backgrounds(config.num_backgrounds, seed, split, config.canvas_size)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 97]))
    h_w = config.canvas_size
    examples: list[PairedExample] = []
    while len(examples) < n:
        for _ in range(max_retries):
            clip1 = generate_clip(config, backgrounds, digit_pool, rng, clip_id=f"ev1_{len(examples):06d}")
            clip2 = generate_clip(config, backgrounds, digit_pool, rng, clip_id=f"ev2_{len(examples):06d}")
            i = int(rng.integers(0, config.frames_per_clip))
            j = int(rng.integers(0, config.frames_per_clip - 1))
            if j >= i:
                j += 1
            rel1 = clip1.relative_transform(i, j)
            cross = affine.compose(rel1, clip2.characters[0].placements[i])
            if digit_in_bounds(clip2.characters[0].digit.mask, cross, h_w):
                examples.append(PairedExample(clip1=clip1, clip2=clip2, i=i, j=j))
                break
        else:
            raise RetriesExhausted("could not build an in-bounds paired example")
    return examples


def _predict(model: SceneModel, x_c, x_t1, x_t2, x_b) -> np.ndarray:
    with torch.inference_mode():
        out = model.compose(
            batch_to_tensor([x_c]), batch_to_tensor([x_t1]), batch_to_tensor([x_t2]), batch_to_tensor([x_b])
        )
    return tensor_to_image(out)


def _require_single_character(clip: VideoClip) -> None:
    if len(clip.characters) != 1:
        raise MissingGroundTruth("manipulation protocols need single-character clips")
    if not clip.characters[0].placements:
        raise MissingGroundTruth("clip lacks stored transforms")


def eval_transformation(model: SceneModel, examples: list[PairedExample], n: int | None = None) -> list[EvalRecord]:
    """Character+background of sequence 2, animated by sequence 1's i->j motion."""
    records = []
    for ex in examples[: n if n is not None else len(examples)]:
        _require_single_character(ex.clip1)
        _require_single_character(ex.clip2)
        pred = _predict(
            model, ex.clip2.frames[ex.i], ex.clip1.frames[ex.i], ex.clip1.frames[ex.j], ex.clip2.frames[ex.i]
        )
        rel1 = ex.clip1.relative_transform(ex.i, ex.j)
        track2 = ex.clip2.characters[0]
        cross = affine.compose(rel1, track2.placements[ex.i])
        bg2 = ex.clip2.background_render
        if bg2 is None:
            bg2 = render_background(ex.clip2.background)
        gt = quantize8(compose_frame(bg2, [(track2.digit.image, track2.digit.mask, cross)]))
        records.append(
            EvalRecord(
                protocol="transformation",
                mse=mse(pred, gt),
                source_ids=(ex.clip1.clip_id, ex.clip2.clip_id, ex.i, ex.j),
            )
        )
    return records


def eval_background(model: SceneModel, examples: list[PairedExample], n: int | None = None) -> list[EvalRecord]:
    """Character of sequence 1 with its own motion, on sequence 2's background."""
    records = []
    for ex in examples[: n if n is not None else len(examples)]:
        _require_single_character(ex.clip1)
        pred = _predict(
            model, ex.clip1.frames[ex.i], ex.clip1.frames[ex.i], ex.clip1.frames[ex.j], ex.clip2.frames[ex.j]
        )
        track1 = ex.clip1.characters[0]
        bg2 = ex.clip2.background_render
        if bg2 is None:
            bg2 = render_background(ex.clip2.background)
        gt = quantize8(compose_frame(bg2, [(track1.digit.image, track1.digit.mask, track1.placements[ex.j])]))
        records.append(
            EvalRecord(
                protocol="background",
                mse=mse(pred, gt),
                source_ids=(ex.clip1.clip_id, ex.clip2.clip_id, ex.i, ex.j),
            )
        )
    return records


def baseline_video_frames(clips: list[VideoClip], n: int, rng: np.random.Generator) -> list[EvalRecord]:
    """MSE of two random distinct frames from a random clip."""
    records = []
    for _ in range(n):
        clip = clips[int(rng.integers(0, len(clips)))]
        i = int(rng.integers(0, clip.num_frames))
        j = int(rng.integers(0, clip.num_frames - 1))
        if j >= i:
            j += 1
        records.append(
            EvalRecord(protocol="video_frames", mse=mse(clip.frames[i], clip.frames[j]), source_ids=(clip.clip_id, i, j))
        )
    return records


def baseline_no_object(clips: list[VideoClip], n: int, rng: np.random.Generator) -> list[EvalRecord]:
    """MSE of a random frame against that clip's bare background."""
    records = []
    for _ in range(n):
        clip = clips[int(rng.integers(0, len(clips)))]
        if clip.background_render is None:
            raise MissingBackgroundRender(f"clip {clip.clip_id} has no background render")
        k = int(rng.integers(0, clip.num_frames))
        records.append(
            EvalRecord(protocol="no_object", mse=mse(clip.frames[k], clip.background_render), source_ids=(clip.clip_id, k))
        )
    return records


@dataclass
class SpriteSequence:
    character_id: str
    category: str
    frames: list[np.ndarray]  # 60x60x3 in [0, 1]
    masks: list[np.ndarray]  # 60x60 bool


def load_sprite_assets(path: str | Path) -> list[SpriteSequence]:
    """Load sprite sequences from <root>/<character>/<category>_<k>.png + _mask.png pairs."""
    from .images import load_png

    root = Path(path)
    if not root.is_dir():
        raise AssetsUnavailable(f"sprite asset directory {root} not found")
    sequences: list[SpriteSequence] = []
    for char_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for category in SPRITE_CATEGORIES:
            frame_files = sorted(char_dir.glob(f"{category}_[0-9]*.png"))
            frame_files = [f for f in frame_files if not f.stem.endswith("_mask")]
            if not frame_files:
                continue
            frames, masks = [], []
            for f in frame_files:
                mask_file = f.with_name(f.stem + "_mask.png")
                if not mask_file.exists():
                    raise AssetsUnavailable(f"missing mask for {f}")
                frames.append(load_png(f))
                masks.append(load_png(mask_file) >= 0.5)
            sequences.append(
                SpriteSequence(character_id=char_dir.name, category=category, frames=frames, masks=masks)
            )
    if not sequences:
        raise AssetsUnavailable(f"no sprite sequences under {root}")
    return sequences


def eval_sprite_analogy(
    model: SceneModel,
    sequences: list[SpriteSequence],
    backgrounds: list[BackgroundSpec] | None = None,
    rng: np.random.Generator | None = None,
) -> list[EvalRecord]:
    """Analogy reconstruction per animation category.

    For a source sequence (x1_1 -> x1_k) and a target sequence of the same
    category, predict frame k of the target from its first frame; records the
    per-pixel MSE labeled by category. With backgrounds supplied, sprites are
    composited onto randomly assigned canvases first, and masked character /
    background MSEs are recorded alongside the plain analogy MSE.
    """
    rng = rng or np.random.default_rng(0)
    by_category: dict[str, list[SpriteSequence]] = {}
    for seq in sequences:
        by_category.setdefault(seq.category, []).append(seq)

    records: list[EvalRecord] = []
    for category, seqs in sorted(by_category.items()):
        for target in seqs:
            source = seqs[int(rng.integers(0, len(seqs)))]
            length = min(len(source.frames), len(target.frames))
            k = int(rng.integers(0, length))
            if backgrounds is not None:
                bg_src = render_background(backgrounds[int(rng.integers(0, len(backgrounds)))])
                bg_tgt = render_background(backgrounds[int(rng.integers(0, len(backgrounds)))])
                src_1 = composite_sprite(source.frames[0], source.masks[0], bg_src)
                src_k = composite_sprite(source.frames[k], source.masks[k], bg_src)
                tgt_1 = composite_sprite(target.frames[0], target.masks[0], bg_tgt)
                gt = composite_sprite(target.frames[k], target.masks[k], bg_tgt)
                pred = _predict(model, tgt_1, src_1, src_k, tgt_1)
                full_mask = np.zeros(gt.shape[:2], dtype=bool)
                full_mask[2:62, 2:62] = target.masks[k]
                records.append(
                    EvalRecord("analogy", mse(pred, gt), category, (source.character_id, target.character_id, k))
                )
                records.append(
                    EvalRecord(
                        "character_only",
                        masked_mse(pred, gt, full_mask, "character"),
                        category,
                        (source.character_id, target.character_id, k),
                    )
                )
                records.append(
                    EvalRecord(
                        "background_only",
                        masked_mse(pred, gt, full_mask, "background"),
                        category,
                        (source.character_id, target.character_id, k),
                    )
                )
            else:
                pred = _predict(model, target.frames[0], source.frames[0], source.frames[k], target.frames[0])
                gt = target.frames[k]
                records.append(
                    EvalRecord("analogy", mse(pred, gt), category, (source.character_id, target.character_id, k))
                )
    return records


def summarize(records: list[EvalRecord]) -> dict[tuple[str, str | None], SummaryStats]:
    """Stats per (protocol, category) group; quartiles use linear interpolation."""
    if not records:
        raise EmptyInput("no records to summarize")
    groups: dict[tuple[str, str | None], list[float]] = {}
    for r in records:
        groups.setdefault((r.protocol, r.category), []).append(r.mse)
    out = {}
    for key, vals in groups.items():
        arr = np.asarray(vals, dtype=np.float64)
        q1, med, q3 = np.percentile(arr, [25, 50, 75], method="linear")
        iqr = q3 - q1
        lo = float(arr[arr >= q1 - 1.5 * iqr].min())
        hi = float(arr[arr <= q3 + 1.5 * iqr].max())
        out[key] = SummaryStats(
            count=len(vals),
            mean=float(arr.mean()),
            median=float(med),
            q1=float(q1),
            q3=float(q3),
            whisker_lo=lo,
            whisker_hi=hi,
        )
    return out


def write_records(records: list[EvalRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["protocol", "category", "mse", "source_ids"])
        for r in records:
            writer.writerow([r.protocol, r.category or "", f"{r.mse:.10g}", json.dumps(list(r.source_ids))])


def write_summary(stats: dict[tuple[str, str | None], SummaryStats], path: str | Path) -> None:
    payload = {
        f"{proto}" + (f"/{cat}" if cat else ""): vars(s) for (proto, cat), s in sorted(stats.items(), key=str)
    }
    Path(path).write_text(json.dumps(payload, indent=2))


@dataclass(frozen=True)
class EvalConfig:
    n: int = 1000
    seed: int = 1234
    protocols: tuple[str, ...] = ("transformation", "background", "video_frames", "no_object")

    def to_json(self) -> dict:
        return {"n": self.n, "seed": self.seed, "protocols": list(self.protocols)}


def run_evaluation(model: SceneModel, dataset, cfg: EvalConfig, out_dir: str | Path) -> dict:
    """Run the requested protocols against a dataset; write records, summary, plots.

    Manipulation protocols build fresh paired examples from the dataset's
    config; baselines run over the dataset's own clips.
    """
    from .digits import load_digit_pool

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records: list[EvalRecord] = []
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 11]))

    wants_manipulation = any(p in cfg.protocols for p in ("transformation", "background"))
    if wants_manipulation:
        digit_pool = load_digit_pool(dataset.config.digit_source, size=dataset.config.digit_size)
        examples = build_paired_eval_set(dataset.config, digit_pool, cfg.n, cfg.seed)
        if "transformation" in cfg.protocols:
            records += eval_transformation(model, examples)
        if "background" in cfg.protocols:
            records += eval_background(model, examples)
    if "video_frames" in cfg.protocols:
        records += baseline_video_frames(dataset.clips, cfg.n, rng)
    if "no_object" in cfg.protocols:
        records += baseline_no_object(dataset.clips, cfg.n, rng)

    stats = summarize(records)
    write_records(records, out / "records.csv")
    write_summary(stats, out / "summary.json")
    emit_plots(records, out)
    return {
        f"{proto}" + (f"/{cat}" if cat else ""): {"median": s.median, "mean": s.mean, "count": s.count}
        for (proto, cat), s in sorted(stats.items(), key=str)
    }


def emit_plots(records: list[EvalRecord], path: str | Path) -> list[Path]:
    """Boxplots per protocol (and per category for sprite analogies)."""
    if not records:
        raise EmptyInput("no records to plot")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(path)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    protocols = sorted({r.protocol for r in records})
    data = [[r.mse for r in records if r.protocol == p] for p in protocols]
    fig, ax = plt.subplots(figsize=(1.6 * len(protocols) + 2, 4))
    ax.boxplot(data, tick_labels=protocols, whis=1.5)
    ax.set_ylabel("per-pixel MSE")
    fig.tight_layout()
    target = out_dir / "mse_boxplot.png"
    fig.savefig(target, dpi=120)
    plt.close(fig)
    written.append(target)

    categories = sorted({r.category for r in records if r.category})
    if categories:
        for proto in protocols:
            per_cat = [
                [r.mse for r in records if r.protocol == proto and r.category == c] for c in categories
            ]
            if not any(per_cat):
                continue
            fig, ax = plt.subplots(figsize=(1.6 * len(categories) + 2, 4))
            ax.boxplot(per_cat, tick_labels=categories, whis=1.5)
            ax.set_ylabel("per-pixel MSE")
            ax.set_title(proto)
            fig.tight_layout()
            target = out_dir / f"mse_by_category_{proto}.png"
            fig.savefig(target, dpi=120)
            plt.close(fig)
            written.append(target)
    return written
