"""Character sources: 28x28 grayscale glyphs with binary foreground masks.

The default pool upsamples scikit-learn's bundled 8x8 handwritten digits to
28x28 so generation works offline; a directory of grayscale PNGs (e.g. real
MNIST exports named ``<label>_<anything>.png``) can be used instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidConfig

MASK_THRESHOLD = 0.5
DIGIT_SIZE = (28, 28)


@dataclass(frozen=True)
class DigitInstance:
    image: np.ndarray  # (28, 28) float64 stroke intensity in [0, 1], 1 = full stroke
    mask: np.ndarray  # (28, 28) bool, image >= 0.5
    label: int

    @property
    def center_local(self) -> tuple[float, float]:
        h, w = self.image.shape
        return ((w - 1) / 2.0, (h - 1) / 2.0)  # (x, y)


class DigitPool:
    """Immutable collection of digit instances with deterministic sampling."""

    def __init__(self, digits: list[DigitInstance]):
        if not digits:
            raise InvalidConfig("digit pool is empty")
        self._digits = list(digits)

    def __len__(self) -> int:
        return len(self._digits)

    def __getitem__(self, idx: int) -> DigitInstance:
        return self._digits[idx]

    def sample(self, rng: np.random.Generator) -> DigitInstance:
        return self._digits[int(rng.integers(0, len(self._digits)))]

    def filter_label(self, label: int) -> "DigitPool":
        kept = [d for d in self._digits if d.label == label]
        return DigitPool(kept)


def _to_instance(intensity: np.ndarray, label: int) -> DigitInstance:
    intensity = np.clip(intensity.astype(np.float64), 0.0, 1.0)
    mask = intensity >= MASK_THRESHOLD
    return DigitInstance(image=intensity, mask=mask, label=label)


def _upsample(img_small: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    pil = Image.fromarray((img_small * 255).astype(np.uint8))
    pil = pil.resize((size[1], size[0]), Image.BILINEAR)
    return np.asarray(pil, dtype=np.float64) / 255.0


def builtin_digit_pool(size: tuple[int, int] = DIGIT_SIZE) -> DigitPool:
    """Scikit-learn's 8x8 digits, upsampled and contrast-stretched to crisp strokes."""
    from sklearn.datasets import load_digits

    data = load_digits()
    digits = []
    for img8, label in zip(data.images, data.target):
        big = _upsample(img8 / 16.0, size)
        # Upsampling smears strokes toward mid-gray; stretch so the mask
        # threshold cuts through the stroke edge rather than its plateau.
        stretched = np.clip((big - 0.25) / 0.5, 0.0, 1.0)
        digits.append(_to_instance(stretched, int(label)))
    return DigitPool(digits)


def directory_digit_pool(path: str | Path, size: tuple[int, int] = DIGIT_SIZE) -> DigitPool:
    """Load grayscale digit PNGs named ``<label>_<anything>.png`` from a directory."""
    root = Path(path)
    files = sorted(root.glob("*.png"))
    if not files:
        raise InvalidConfig(f"no .png digit files in {root}")
    digits = []
    for f in files:
        try:
            label = int(f.stem.split("_")[0])
        except ValueError as exc:
            raise InvalidConfig(f"cannot parse label from {f.name}") from exc
        arr = np.asarray(Image.open(f).convert("L"), dtype=np.float64) / 255.0
        if arr.shape != size:
            arr = _upsample(arr, size)
        digits.append(_to_instance(arr, label))
    return DigitPool(digits)


def load_digit_pool(source: str = "builtin", size: tuple[int, int] = DIGIT_SIZE) -> DigitPool:
    """Resolve a pool from "builtin" or a directory path."""
    if source == "builtin":
        return builtin_digit_pool(size)
    return directory_digit_pool(source, size)
