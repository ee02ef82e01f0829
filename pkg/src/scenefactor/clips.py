"""Synthetic video clips: character trajectories, frame compositing, pair sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import affine
from .affine import StepTransform
from .backgrounds import BackgroundSpec, generate_backgrounds, render_background
from .digits import DigitInstance, DigitPool
from .errors import InvalidConfig, RetriesExhausted, ShapeMismatch


@dataclass(frozen=True)
class DatasetConfig:
    num_backgrounds: int = 64
    num_clips: int = 100
    frames_per_clip: int = 5
    digits_per_clip: int = 1
    canvas_size: tuple[int, int] = (64, 64)
    digit_size: tuple[int, int] = (28, 28)
    seed: int = 0
    max_retries: int = 100
    digit_source: str = "builtin"

    def validate(self) -> None:
        if self.num_backgrounds < 1:
            raise InvalidConfig("num_backgrounds must be >= 1")
        if self.frames_per_clip < 2:
            raise InvalidConfig("frames_per_clip must be >= 2")
        if self.digits_per_clip < 1:
            raise InvalidConfig("digits_per_clip must be >= 1")
        if self.canvas_size[0] < self.digit_size[0] or self.canvas_size[1] < self.digit_size[1]:
            raise InvalidConfig("canvas smaller than digit")
        if self.max_retries < 1:
            raise InvalidConfig("max_retries must be >= 1")

    def to_json(self) -> dict:
        return {
            "num_backgrounds": self.num_backgrounds,
            "num_clips": self.num_clips,
            "frames_per_clip": self.frames_per_clip,
            "digits_per_clip": self.digits_per_clip,
            "canvas_size": list(self.canvas_size),
            "digit_size": list(self.digit_size),
            "seed": self.seed,
            "max_retries": self.max_retries,
            "digit_source": self.digit_source,
        }

    @staticmethod
    def from_json(obj: dict) -> "DatasetConfig":
        return DatasetConfig(
            num_backgrounds=int(obj["num_backgrounds"]),
            num_clips=int(obj["num_clips"]),
            frames_per_clip=int(obj["frames_per_clip"]),
            digits_per_clip=int(obj["digits_per_clip"]),
            canvas_size=tuple(obj["canvas_size"]),
            digit_size=tuple(obj["digit_size"]),
            seed=int(obj["seed"]),
            max_retries=int(obj["max_retries"]),
            digit_source=obj.get("digit_source", "builtin"),
        )


@dataclass
class CharacterTrack:
    """One character's appearance and motion through a clip."""

    digit: DigitInstance
    initial_offset: tuple[int, int]  # (x, y) of the digit's top-left corner
    steps: list[StepTransform]  # length M-1
    placements: list[np.ndarray]  # length M, cumulative local->canvas 2x3 maps


@dataclass
class VideoClip:
    frames: list[np.ndarray]  # M images, HxWx3 float in [0, 1]
    background: BackgroundSpec
    characters: list[CharacterTrack]
    masks: list[np.ndarray]  # M binary HxW masks (union over characters)
    clip_id: str
    background_render: np.ndarray | None = None

    @property
    def num_frames(self) -> int:
        return len(self.frames)

    def relative_transform(self, i: int, j: int, character: int = 0) -> np.ndarray:
        """Ground-truth character motion from frame i to frame j (canvas pixels)."""
        placements = self.characters[character].placements
        return affine.compose(placements[j], affine.invert(placements[i]))


@dataclass(frozen=True)
class FramePair:
    x1: np.ndarray
    x2: np.ndarray
    clip_id: str
    indices: tuple[int, int]
    ground_truth_relative_transform: np.ndarray | None = None


def warp_image(image: np.ndarray, placement: np.ndarray, out_hw: tuple[int, int]) -> np.ndarray:
    """Bilinearly warp `image` onto an out_hw canvas by the content-motion map `placement`.

    Inverse warping: each output pixel samples the input at placement^-1;
    out-of-range samples read as zero.
    """
    out_h, out_w = out_hw
    inv = affine.invert(placement)
    gx, gy = np.meshgrid(np.arange(out_w, dtype=np.float64), np.arange(out_h, dtype=np.float64))
    sx = inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2]
    sy = inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2]
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0

    src_h, src_w = image.shape[:2]
    channels = image.ndim == 3

    def gather(yy: np.ndarray, xx: np.ndarray) -> np.ndarray:
        valid = (yy >= 0) & (yy < src_h) & (xx >= 0) & (xx < src_w)
        vals = image[np.clip(yy, 0, src_h - 1), np.clip(xx, 0, src_w - 1)]
        return vals * (valid[..., None] if channels else valid)

    w00 = (1 - fx) * (1 - fy)
    w10 = fx * (1 - fy)
    w01 = (1 - fx) * fy
    w11 = fx * fy
    if channels:
        w00, w10, w01, w11 = (w[..., None] for w in (w00, w10, w01, w11))
    return (
        w00 * gather(y0, x0)
        + w10 * gather(y0, x0 + 1)
        + w01 * gather(y0 + 1, x0)
        + w11 * gather(y0 + 1, x0 + 1)
    )


def digit_in_bounds(mask: np.ndarray, placement: np.ndarray, canvas_hw: tuple[int, int]) -> bool:
    """True when every foreground pixel center maps inside the canvas."""
    ys, xs = np.nonzero(mask)
    pts = np.stack([xs, ys], axis=1).astype(np.float64)
    mapped = affine.apply_points(placement, pts)
    h, w = canvas_hw
    return bool(
        (mapped[:, 0] >= 0).all()
        and (mapped[:, 0] <= w - 1).all()
        and (mapped[:, 1] >= 0).all()
        and (mapped[:, 1] <= h - 1).all()
    )


def render_character(digit: DigitInstance, placement: np.ndarray, canvas_hw: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Warped stroke intensity and binarized foreground mask on the canvas."""
    intensity = warp_image(digit.image, placement, canvas_hw)
    mask = warp_image(digit.mask.astype(np.float64), placement, canvas_hw) >= 0.5
    return intensity, mask


def compose_frame(
    background_img: np.ndarray,
    digit_canvases: list[tuple[np.ndarray, np.ndarray, np.ndarray]],
) -> np.ndarray:
    """Composite characters onto a background.

    digit_canvases holds (digit intensity image, binary mask, placement)
    triples. Each character's warped mask pixels are blackened to
    1 - warped intensity (all channels); pixels outside every mask are the
    untouched background. Later characters paint over earlier ones.
    """
    frame = background_img.copy()
    canvas_hw = frame.shape[:2]
    for digit_img, digit_mask, placement in digit_canvases:
        intensity = warp_image(digit_img, placement, canvas_hw)
        mask = warp_image(digit_mask.astype(np.float64), placement, canvas_hw) >= 0.5
        dark = 1.0 - intensity
        frame[mask] = dark[mask, None]
    return frame


def generate_clip(
    config: DatasetConfig,
    backgrounds: list[BackgroundSpec],
    digit_pool: DigitPool,
    rng: np.random.Generator,
    clip_id: str = "clip",
) -> VideoClip:
    """Generate one clip: random characters on a random background, stepwise motion.

    Each of the M-1 steps per character is drawn, applied cumulatively, and
    rejected/redrawn whenever the warped character would leave the canvas.
    """
    config.validate()
    if len(digit_pool) == 0:
        raise InvalidConfig("digit pool is empty")
    if digit_pool[0].image.shape != tuple(config.digit_size):
        raise InvalidConfig(
            f"digit pool shape {digit_pool[0].image.shape} does not match config digit_size {config.digit_size}"
        )
    h, w = config.canvas_size
    dh, dw = config.digit_size
    background = backgrounds[int(rng.integers(0, len(backgrounds)))]
    bg_img = render_background(background)

    tracks: list[CharacterTrack] = []
    for _ in range(config.digits_per_clip):
        digit = digit_pool.sample(rng)
        off_x = int(rng.integers(0, w - dw + 1))
        off_y = int(rng.integers(0, h - dh + 1))
        placement = affine.translation(off_x, off_y)
        tracks.append(
            CharacterTrack(
                digit=digit,
                initial_offset=(off_x, off_y),
                steps=[],
                placements=[placement],
            )
        )

    for _ in range(config.frames_per_clip - 1):
        for track in tracks:
            current = track.placements[-1]
            for attempt in range(config.max_retries + 1):
                if attempt == config.max_retries:
                    raise RetriesExhausted(
                        f"no in-bounds step found in {config.max_retries} tries"
                    )
                step = affine.sample_step_transform(rng)
                candidate = affine.apply_step(current, step, track.digit.center_local)
                if digit_in_bounds(track.digit.mask, candidate, (h, w)):
                    track.steps.append(step)
                    track.placements.append(candidate)
                    break

    frames: list[np.ndarray] = []
    masks: list[np.ndarray] = []
    for t in range(config.frames_per_clip):
        layers = [(tr.digit.image, tr.digit.mask, tr.placements[t]) for tr in tracks]
        frames.append(compose_frame(bg_img, layers))
        union = np.zeros((h, w), dtype=bool)
        for tr in tracks:
            _, m = render_character(tr.digit, tr.placements[t], (h, w))
            union |= m
        masks.append(union)

    return VideoClip(
        frames=frames,
        background=background,
        characters=tracks,
        masks=masks,
        clip_id=clip_id,
        background_render=bg_img,
    )


def clip_rng(seed: int, split: str, clip_index: int) -> np.random.Generator:
    from .backgrounds import SPLITS

    return np.random.default_rng(np.random.SeedSequence([seed, SPLITS.index(split), clip_index]))


def generate_dataset(
    config: DatasetConfig,
    split: str,
    digit_pool: DigitPool,
) -> tuple[list[BackgroundSpec], list[VideoClip]]:
    """Backgrounds plus clips for one split, all streams derived from config.seed."""
    config.validate()
    backgrounds = generate_backgrounds(config.num_backgrounds, config.seed, split, config.canvas_size)
    clips = []
    for idx in range(config.num_clips):
        rng = clip_rng(config.seed, split, idx)
        clips.append(generate_clip(config, backgrounds, digit_pool, rng, clip_id=f"{split}_{idx:05d}"))
    return backgrounds, clips


def sample_training_pair(clip: VideoClip, rng: np.random.Generator) -> FramePair:
    """Uniform ordered pair of distinct frame indices from one clip."""
    m = clip.num_frames
    if m < 2:
        raise InvalidConfig("need at least two frames to sample a pair")
    i = int(rng.integers(0, m))
    j = int(rng.integers(0, m - 1))
    if j >= i:
        j += 1
    gt = clip.relative_transform(i, j) if len(clip.characters) == 1 else None
    return FramePair(
        x1=clip.frames[i],
        x2=clip.frames[j],
        clip_id=clip.clip_id,
        indices=(i, j),
        ground_truth_relative_transform=gt,
    )


def composite_sprite(sprite_frame: np.ndarray, mask: np.ndarray, background_img: np.ndarray) -> np.ndarray:
    """Center a 60x60 sprite on a 64x64 background, replacing pixels under the mask."""
    if sprite_frame.shape[:2] != (60, 60) or mask.shape != (60, 60):
        raise ShapeMismatch(f"sprite/mask must be 60x60, got {sprite_frame.shape} / {mask.shape}")
    if background_img.shape[:2] != (64, 64):
        raise ShapeMismatch(f"background must be 64x64, got {background_img.shape}")
    out = background_img.copy()
    region = out[2:62, 2:62]
    region[mask.astype(bool)] = sprite_frame[mask.astype(bool)]
    return out
