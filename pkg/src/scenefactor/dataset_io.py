"""On-disk dataset format: PNG frames plus JSON metadata, lossless round trip.

Layout::

    <root>/
      manifest.json                 format version, config echo, clip index
      clips/<clip_id>/
        frame_00.png ...            8-bit RGB frames
        background.png              8-bit RGB background render
        digit_0.png ...             8-bit grayscale character glyphs
        meta.json                   background spec, per-character steps,
                                    cumulative 2x3 matrices (row-major 6-float
                                    lists), per-frame mask run-lengths

Matrices round-trip exactly (JSON float repr); images to 8-bit quantization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .affine import StepTransform
from .backgrounds import BackgroundSpec
from .clips import CharacterTrack, DatasetConfig, VideoClip
from .digits import DigitInstance, MASK_THRESHOLD
from .errors import FormatVersionMismatch, NotADataset
from .images import load_png, save_png

FORMAT_VERSION = 1


def encode_rle(mask: np.ndarray) -> list[int]:
    """Run lengths of the row-major flattened mask, alternating runs starting with zeros."""
    flat = np.asarray(mask, dtype=np.uint8).ravel()
    if flat.size == 0:
        return []
    changes = np.flatnonzero(np.diff(flat))
    counts = np.diff(np.concatenate([[-1], changes, [flat.size - 1]])).tolist()
    if flat[0] == 1:
        counts = [0] + counts
    return [int(c) for c in counts]


def decode_rle(counts: list[int], shape: tuple[int, int]) -> np.ndarray:
    flat = np.zeros(int(np.prod(shape)), dtype=bool)
    pos = 0
    value = False
    for c in counts:
        if value:
            flat[pos : pos + c] = True
        pos += c
        value = not value
    return flat.reshape(shape)


def _matrix_to_list(m: np.ndarray) -> list[float]:
    return [float(v) for v in np.asarray(m, dtype=np.float64).ravel()]


def _matrix_from_list(vals: list[float]) -> np.ndarray:
    return np.asarray(vals, dtype=np.float64).reshape(2, 3)


@dataclass
class Dataset:
    config: DatasetConfig
    split: str
    clips: list[VideoClip]

    def __len__(self) -> int:
        return len(self.clips)


def write_dataset(path: str | Path, clips: list[VideoClip], config: DatasetConfig, split: str) -> Path:
    root = Path(path)
    clips_dir = root / "clips"
    clips_dir.mkdir(parents=True, exist_ok=True)

    index = []
    for clip in clips:
        cdir = clips_dir / clip.clip_id
        cdir.mkdir(parents=True, exist_ok=True)
        for k, frame in enumerate(clip.frames):
            save_png(frame, cdir / f"frame_{k:02d}.png")
        if clip.background_render is not None:
            save_png(clip.background_render, cdir / "background.png")
        characters_meta = []
        for n, track in enumerate(clip.characters):
            save_png(track.digit.image, cdir / f"digit_{n}.png")
            characters_meta.append(
                {
                    "digit_file": f"digit_{n}.png",
                    "label": int(track.digit.label),
                    "initial_offset": [int(track.initial_offset[0]), int(track.initial_offset[1])],
                    "steps": [s.to_json() for s in track.steps],
                    "cumulative": [_matrix_to_list(p) for p in track.placements],
                }
            )
        meta = {
            "clip_id": clip.clip_id,
            "background": clip.background.to_json(),
            "characters": characters_meta,
            "mask_shape": list(clip.masks[0].shape) if clip.masks else None,
            "masks_rle": [encode_rle(m) for m in clip.masks],
        }
        (cdir / "meta.json").write_text(json.dumps(meta))
        index.append(
            {
                "id": clip.clip_id,
                "num_frames": clip.num_frames,
                "num_characters": len(clip.characters),
            }
        )

    manifest = {
        "format_version": FORMAT_VERSION,
        "split": split,
        "config": config.to_json(),
        "clips": index,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return root


def _read_clip(cdir: Path, num_frames: int) -> VideoClip:
    meta = json.loads((cdir / "meta.json").read_text())
    frames = [load_png(cdir / f"frame_{k:02d}.png") for k in range(num_frames)]
    bg_path = cdir / "background.png"
    background_render = load_png(bg_path) if bg_path.exists() else None
    characters = []
    for cm in meta["characters"]:
        image = load_png(cdir / cm["digit_file"])
        digit = DigitInstance(image=image, mask=image >= MASK_THRESHOLD, label=int(cm["label"]))
        characters.append(
            CharacterTrack(
                digit=digit,
                initial_offset=(int(cm["initial_offset"][0]), int(cm["initial_offset"][1])),
                steps=[StepTransform.from_json(s) for s in cm["steps"]],
                placements=[_matrix_from_list(v) for v in cm["cumulative"]],
            )
        )
    mask_shape = tuple(meta["mask_shape"])
    masks = [decode_rle(counts, mask_shape) for counts in meta["masks_rle"]]
    return VideoClip(
        frames=frames,
        background=BackgroundSpec.from_json(meta["background"]),
        characters=characters,
        masks=masks,
        clip_id=meta["clip_id"],
        background_render=background_render,
    )


def read_dataset(path: str | Path) -> Dataset:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise NotADataset(f"{root} has no manifest.json")
    manifest = json.loads(manifest_path.read_text())
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(f"format version {version}, expected {FORMAT_VERSION}")
    config = DatasetConfig.from_json(manifest["config"])
    clips = [
        _read_clip(root / "clips" / entry["id"], int(entry["num_frames"]))
        for entry in manifest["clips"]
    ]
    return Dataset(config=config, split=manifest["split"], clips=clips)
