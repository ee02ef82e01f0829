"""2x3 affine matrices over pixel coordinates and the discrete per-step motions.

Conventions used throughout the toolkit:

* A transform is a (2, 3) float64 array ``[[a, b, tx], [c, d, ty]]`` acting on
  column vectors ``(x, y, 1)`` where ``x`` is the column index and ``y`` the
  row index (y grows downward, image convention).
* Matrices are *content-motion* maps: composing a placement with a step moves
  the character, it does not describe a resampling grid.
* Character motion steps are either a rotation about the character's current
  center or an integer translation, with the legal value sets below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Legal per-step values: multiples of 3 degrees up to +-15 for rotation,
# even pixel offsets up to +-10 per axis for translation, zero excluded.
ROTATION_ANGLES = tuple(a for a in range(-15, 16, 3) if a != 0)
SHIFT_VALUES = tuple(s for s in range(-10, 11, 2) if s != 0)


def identity() -> np.ndarray:
    return np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], dtype=np.float64)


def translation(dx: float, dy: float) -> np.ndarray:
    return np.array([[1.0, 0.0, float(dx)], [0.0, 1.0, float(dy)]], dtype=np.float64)


def rotation_about(angle_rad: float, center: tuple[float, float]) -> np.ndarray:
    """Rotation by angle_rad (counterclockwise in (x, y) coordinates) about center."""
    cx, cy = center
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    # T(center) @ R @ T(-center), written out.
    return np.array(
        [
            [c, -s, cx - c * cx + s * cy],
            [s, c, cy - s * cx - c * cy],
        ],
        dtype=np.float64,
    )


def compose(outer: np.ndarray, inner: np.ndarray) -> np.ndarray:
    """Return outer ∘ inner as a 2x3 matrix."""
    a, b = np.asarray(outer, dtype=np.float64), np.asarray(inner, dtype=np.float64)
    out = np.empty((2, 3), dtype=np.float64)
    out[:, :2] = a[:, :2] @ b[:, :2]
    out[:, 2] = a[:, :2] @ b[:, 2] + a[:, 2]
    return out


def invert(t: np.ndarray) -> np.ndarray:
    """Analytic inverse of a 2x3 affine map."""
    t = np.asarray(t, dtype=np.float64)
    inv_block = np.linalg.inv(t[:, :2])
    out = np.empty((2, 3), dtype=np.float64)
    out[:, :2] = inv_block
    out[:, 2] = -inv_block @ t[:, 2]
    return out


def apply_points(t: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Apply the map to an (N, 2) array of (x, y) points."""
    pts = np.asarray(points, dtype=np.float64)
    return pts @ np.asarray(t)[:, :2].T + np.asarray(t)[:, 2]


@dataclass(frozen=True)
class StepTransform:
    """One frame-to-frame character motion: a rotation or a translation.

    angle_degrees is set for rotations, shift for translations; the unused
    field stays at its neutral value.
    """

    kind: str  # "rotation" | "translation"
    angle_degrees: int = 0
    shift: tuple[int, int] = (0, 0)

    def __post_init__(self) -> None:
        if self.kind == "rotation":
            if self.angle_degrees not in ROTATION_ANGLES:
                raise ValueError(f"illegal rotation angle {self.angle_degrees}")
        elif self.kind == "translation":
            if not all(s in SHIFT_VALUES for s in self.shift):
                raise ValueError(f"illegal shift {self.shift}")
        else:
            raise ValueError(f"unknown step kind {self.kind!r}")

    def to_json(self) -> dict:
        if self.kind == "rotation":
            return {"kind": "rotation", "angle_degrees": int(self.angle_degrees)}
        return {"kind": "translation", "shift": [int(self.shift[0]), int(self.shift[1])]}

    @staticmethod
    def from_json(obj: dict) -> "StepTransform":
        if obj["kind"] == "rotation":
            return StepTransform("rotation", angle_degrees=int(obj["angle_degrees"]))
        return StepTransform("translation", shift=(int(obj["shift"][0]), int(obj["shift"][1])))


def sample_step_transform(rng: np.random.Generator) -> StepTransform:
    """Draw rotation or translation with probability 1/2 each, values uniform over the legal sets."""
    if rng.integers(0, 2) == 0:
        angle = int(rng.choice(ROTATION_ANGLES))
        return StepTransform("rotation", angle_degrees=angle)
    dx = int(rng.choice(SHIFT_VALUES))
    dy = int(rng.choice(SHIFT_VALUES))
    return StepTransform("translation", shift=(dx, dy))


def step_matrix(step: StepTransform, placement: np.ndarray, center_local: tuple[float, float]) -> np.ndarray:
    """Canvas-coordinate matrix realizing the step for a character placed by `placement`.

    Rotations act about the character's current canvas-space center, i.e. the
    image of center_local under the placement.
    """
    if step.kind == "translation":
        return translation(*step.shift)
    center_canvas = apply_points(placement, np.array([center_local]))[0]
    return rotation_about(math.radians(step.angle_degrees), (center_canvas[0], center_canvas[1]))


def apply_step(placement: np.ndarray, step: StepTransform, center_local: tuple[float, float]) -> np.ndarray:
    """New placement after applying the step cumulatively."""
    return compose(step_matrix(step, placement, center_local), placement)
