"""Differentiable affine warping of feature maps.

The transform argument is a 2x3 matrix in normalized coordinates
(corner-aligned: -1 and +1 sit on the centers of the first and last cells of
each axis) and is a *content-motion* map: the warped output shows the input's
content moved by the transform. Internally the sampler inverts the map and
bilinearly resamples every channel, reading out-of-range samples as zero.

The sampling positions are computed so that integer-position cases stay exact:
an identity transform returns the input bit-for-bit, and a translation by
exactly one cell is a pure index shift with zero fill.
"""

from __future__ import annotations

import torch

from .errors import ShapeMismatch

IDENTITY_OFFSET = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0)


def identity_theta(batch: int = 1, dtype: torch.dtype = torch.float32, device=None) -> torch.Tensor:
    eye = torch.tensor([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], dtype=dtype, device=device)
    return eye.unsqueeze(0).expand(batch, 2, 3).clone()


def invert_theta(theta: torch.Tensor) -> torch.Tensor:
    """Analytic inverse of batched 2x3 affine maps (differentiable)."""
    a, b, tx = theta[:, 0, 0], theta[:, 0, 1], theta[:, 0, 2]
    c, d, ty = theta[:, 1, 0], theta[:, 1, 1], theta[:, 1, 2]
    det = a * d - b * c
    ia, ib = d / det, -b / det
    ic, id_ = -c / det, a / det
    itx = -(ia * tx + ib * ty)
    ity = -(ic * tx + id_ * ty)
    return torch.stack(
        [torch.stack([ia, ib, itx], dim=-1), torch.stack([ic, id_, ity], dim=-1)], dim=1
    )


def theta_normalized_to_pixel(theta: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """Conjugate a normalized-coordinate map into pixel coordinates.

    Written so the conversion is exact where it must be: identity maps to
    identity bit-for-bit, and a normalized translation of 2k/(W-1) maps to a
    k-pixel translation when both are computed in the same dtype.
    """
    one = theta.new_tensor(1.0)
    sx = theta.new_tensor(2.0) / (width - 1)
    sy = theta.new_tensor(2.0) / (height - 1)
    a, b, tx = theta[:, 0, 0], theta[:, 0, 1], theta[:, 0, 2]
    c, d, ty = theta[:, 1, 0], theta[:, 1, 1], theta[:, 1, 2]
    # x' = a x + b (sy/sx) y + (tx + (1 - a) - b)/sx, and symmetrically for y.
    # The grouping (tx + ((1-a) - b)) keeps the offset exactly tx/sx when a=1, b=0.
    row0 = torch.stack([a, b * (sy / sx), (tx + ((one - a) - b)) / sx], dim=-1)
    row1 = torch.stack([c * (sx / sy), d, (ty + ((one - d) - c)) / sy], dim=-1)
    return torch.stack([row0, row1], dim=1)


def theta_pixel_to_normalized(theta_px: torch.Tensor, height: int, width: int) -> torch.Tensor:
    """Inverse of theta_normalized_to_pixel."""
    one = theta_px.new_tensor(1.0)
    sx = theta_px.new_tensor(2.0) / (width - 1)
    sy = theta_px.new_tensor(2.0) / (height - 1)
    a, b, tx = theta_px[:, 0, 0], theta_px[:, 0, 1], theta_px[:, 0, 2]
    c, d, ty = theta_px[:, 1, 0], theta_px[:, 1, 1], theta_px[:, 1, 2]
    row0 = torch.stack([a, b * (sx / sy), tx * sx - ((one - a) - b * (sx / sy))], dim=-1)
    row1 = torch.stack([c * (sy / sx), d, ty * sy - ((one - d) - c * (sy / sx))], dim=-1)
    return torch.stack([row0, row1], dim=1)


def affine_feature_warp(theta: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
    """Warp features (B, C, H, W) by batched normalized 2x3 content-motion maps.

    Differentiable w.r.t. both theta and z. Out-of-range samples are zero.
    """
    if z.dim() != 4:
        raise ShapeMismatch(f"features must be (B, C, H, W), got {tuple(z.shape)}")
    if theta.dim() == 2:
        theta = theta.unsqueeze(0)
    if theta.shape[0] == 1 and z.shape[0] > 1:
        theta = theta.expand(z.shape[0], 2, 3)
    if theta.shape != (z.shape[0], 2, 3):
        raise ShapeMismatch(f"theta shape {tuple(theta.shape)} does not match batch {z.shape[0]}")
    theta = theta.to(z.dtype)

    batch, channels, height, width = z.shape
    sampling = invert_theta(theta_normalized_to_pixel(theta, height, width))

    xs = torch.arange(width, dtype=z.dtype, device=z.device)
    ys = torch.arange(height, dtype=z.dtype, device=z.device)
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")  # (H, W)

    # Per-batch source positions for every output cell.
    src_x = sampling[:, 0, 0, None, None] * gx + sampling[:, 0, 1, None, None] * gy + sampling[:, 0, 2, None, None]
    src_y = sampling[:, 1, 0, None, None] * gx + sampling[:, 1, 1, None, None] * gy + sampling[:, 1, 2, None, None]

    x0 = torch.floor(src_x)
    y0 = torch.floor(src_y)
    fx = src_x - x0
    fy = src_y - y0
    x0l = x0.long()
    y0l = y0.long()

    def corner(yi: torch.Tensor, xi: torch.Tensor, wgt: torch.Tensor) -> torch.Tensor:
        valid = (yi >= 0) & (yi < height) & (xi >= 0) & (xi < width)
        flat = (yi.clamp(0, height - 1) * width + xi.clamp(0, width - 1)).view(batch, 1, -1)
        vals = torch.gather(z.reshape(batch, channels, -1), 2, flat.expand(batch, channels, -1))
        vals = vals.view(batch, channels, height, width)
        return vals * (wgt * valid.to(z.dtype)).unsqueeze(1)

    out = (
        corner(y0l, x0l, (1 - fx) * (1 - fy))
        + corner(y0l, x0l + 1, fx * (1 - fy))
        + corner(y0l + 1, x0l, (1 - fx) * fy)
        + corner(y0l + 1, x0l + 1, fx * fy)
    )
    return out
