"""Random diamond-on-color canvas backgrounds and their rasterization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .colors import palette
from .errors import InvalidConfig

SPLITS = ("train", "val", "test")
NUM_DIAMONDS = 5
RADIUS_CHOICES = (7, 8, 9, 10)

_PALETTE = palette(exclude_black=False)
_PALETTE_NO_BLACK = palette(exclude_black=True)


@dataclass(frozen=True)
class DiamondSpec:
    """One diamond: an L1 ball of the given radius around center, in the given color."""

    color: tuple[float, float, float]
    center: tuple[int, int]  # (row, col)
    radius: int

    def to_json(self) -> dict:
        return {
            "color": list(self.color),
            "center": [int(self.center[0]), int(self.center[1])],
            "radius": int(self.radius),
        }

    @staticmethod
    def from_json(obj: dict) -> "DiamondSpec":
        return DiamondSpec(
            color=tuple(obj["color"]),
            center=(int(obj["center"][0]), int(obj["center"][1])),
            radius=int(obj["radius"]),
        )


@dataclass(frozen=True)
class BackgroundSpec:
    base_color: tuple[float, float, float]
    diamonds: tuple[DiamondSpec, ...]
    id: int
    split: str
    base_color_name: str = ""
    size: tuple[int, int] = (64, 64)

    def to_json(self) -> dict:
        return {
            "base_color": list(self.base_color),
            "base_color_name": self.base_color_name,
            "diamonds": [d.to_json() for d in self.diamonds],
            "id": int(self.id),
            "split": self.split,
            "size": [int(self.size[0]), int(self.size[1])],
        }

    @staticmethod
    def from_json(obj: dict) -> "BackgroundSpec":
        return BackgroundSpec(
            base_color=tuple(obj["base_color"]),
            diamonds=tuple(DiamondSpec.from_json(d) for d in obj["diamonds"]),
            id=int(obj["id"]),
            split=obj["split"],
            base_color_name=obj.get("base_color_name", ""),
            size=tuple(obj.get("size", [64, 64])),
        )


def background_rng(seed: int, split: str) -> np.random.Generator:
    """Independent RNG stream per (seed, split)."""
    if split not in SPLITS:
        raise InvalidConfig(f"unknown split {split!r}")
    return np.random.default_rng(np.random.SeedSequence([seed, SPLITS.index(split)]))


def sample_background(rng: np.random.Generator, bg_id: int, split: str, size: tuple[int, int] = (64, 64)) -> BackgroundSpec:
    h, w = size
    base_idx = int(rng.integers(0, len(_PALETTE_NO_BLACK)))
    base_name, base_color = _PALETTE_NO_BLACK[base_idx]
    diamonds = []
    for _ in range(NUM_DIAMONDS):
        _, color = _PALETTE[int(rng.integers(0, len(_PALETTE)))]
        center = (int(rng.integers(0, h)), int(rng.integers(0, w)))
        radius = int(rng.choice(RADIUS_CHOICES))
        diamonds.append(DiamondSpec(color=color, center=center, radius=radius))
    return BackgroundSpec(
        base_color=base_color,
        diamonds=tuple(diamonds),
        id=bg_id,
        split=split,
        base_color_name=base_name,
        size=size,
    )


def generate_backgrounds(num: int, seed: int, split: str, size: tuple[int, int] = (64, 64)) -> list[BackgroundSpec]:
    """Generate `num` background specs; deterministic given (seed, split)."""
    if num < 1:
        raise InvalidConfig("need at least one background")
    rng = background_rng(seed, split)
    return [sample_background(rng, i, split, size) for i in range(num)]


def render_background(spec: BackgroundSpec) -> np.ndarray:
    """Rasterize a spec to an HxWx3 float image in [0, 1].

    Pixels within L1 distance `radius` of a diamond center take that diamond's
    color, later diamonds painted over earlier ones; everything else is the
    base color. Diamonds are clipped at the canvas edge.
    """
    h, w = spec.size
    img = np.empty((h, w, 3), dtype=np.float64)
    img[:] = np.asarray(spec.base_color)
    rows = np.arange(h)[:, None]
    cols = np.arange(w)[None, :]
    for d in spec.diamonds:
        inside = np.abs(rows - d.center[0]) + np.abs(cols - d.center[1]) <= d.radius
        img[inside] = np.asarray(d.color)
    return img
