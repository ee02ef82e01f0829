"""Small helpers for 8-bit image persistence and wire encoding."""

from __future__ import annotations

import base64
import io
from pathlib import Path

import numpy as np
from PIL import Image


def quantize8(img: np.ndarray) -> np.ndarray:
    """Round a [0, 1] float image to the 8-bit grid, staying float."""
    return np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def from_uint8(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float64) / 255.0


def save_png(img: np.ndarray, path: str | Path) -> None:
    """Save a float [0, 1] image (HxW grayscale or HxWx3 RGB) as 8-bit PNG."""
    arr = to_uint8(img)
    mode = "L" if arr.ndim == 2 else "RGB"
    Image.fromarray(arr, mode=mode).save(path)


def load_png(path: str | Path) -> np.ndarray:
    """Load a PNG back into a float [0, 1] array (RGB kept as HxWx3, L as HxW)."""
    with Image.open(path) as pil:
        if pil.mode == "L":
            return from_uint8(np.asarray(pil))
        return from_uint8(np.asarray(pil.convert("RGB")))


def png_bytes(img: np.ndarray) -> bytes:
    buf = io.BytesIO()
    arr = to_uint8(img)
    mode = "L" if arr.ndim == 2 else "RGB"
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return buf.getvalue()


def png_to_array(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as pil:
        return from_uint8(np.asarray(pil.convert("RGB")))


def image_to_b64(img: np.ndarray) -> str:
    return base64.b64encode(png_bytes(img)).decode("ascii")


def b64_to_image(data: str) -> np.ndarray:
    return png_to_array(base64.b64decode(data))
