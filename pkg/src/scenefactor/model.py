"""Learnable scene factorization: character/background encoders, renderer, transform head."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .errors import CheckpointError, InvalidConfig, ShapeMismatch
from .warp import affine_feature_warp

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ArchConfig:
    """Architecture hyperparameters; encoders share these, parameters stay disjoint."""

    image_size: tuple[int, int] = (64, 64)
    in_channels: int = 3
    stage_channels: tuple[int, ...] = (64, 128, 256)
    blocks_per_stage: int = 2
    feature_channels: int = 64
    thead_channels: int = 32

    def validate(self) -> None:
        if len(self.stage_channels) < 1:
            raise InvalidConfig("need at least one downsampling stage")
        factor = 2 ** len(self.stage_channels)
        if self.image_size[0] % factor or self.image_size[1] % factor:
            raise InvalidConfig(f"image size {self.image_size} not divisible by {factor}")
        if self.feature_channels < 1:
            raise InvalidConfig("feature_channels must be positive")
        # Only normalized widths need the group size to divide them.
        for ch in (*self.stage_channels, self.thead_channels):
            if ch % 8:
                raise InvalidConfig(f"channel width {ch} must be a multiple of 8")

    @property
    def num_stages(self) -> int:
        return len(self.stage_channels)

    @property
    def feature_shape(self) -> tuple[int, int, int]:
        factor = 2 ** self.num_stages
        return (self.feature_channels, self.image_size[0] // factor, self.image_size[1] // factor)

    def to_json(self) -> dict:
        return {
            "image_size": list(self.image_size),
            "in_channels": self.in_channels,
            "stage_channels": list(self.stage_channels),
            "blocks_per_stage": self.blocks_per_stage,
            "feature_channels": self.feature_channels,
            "thead_channels": self.thead_channels,
        }

    @staticmethod
    def from_json(obj: dict) -> "ArchConfig":
        return ArchConfig(
            image_size=tuple(obj["image_size"]),
            in_channels=int(obj["in_channels"]),
            stage_channels=tuple(obj["stage_channels"]),
            blocks_per_stage=int(obj["blocks_per_stage"]),
            feature_channels=int(obj["feature_channels"]),
            thead_channels=int(obj["thead_channels"]),
        )


def _norm(ch: int) -> nn.GroupNorm:
    return nn.GroupNorm(8, ch)


class ResidualBlock(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.conv1 = nn.Conv2d(ch, ch, 3, padding=1)
        self.norm1 = _norm(ch)
        self.conv2 = nn.Conv2d(ch, ch, 3, padding=1)
        self.norm2 = _norm(ch)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = torch.nn.functional.gelu(self.norm1(self.conv1(x)))
        h = self.norm2(self.conv2(h))
        return torch.nn.functional.gelu(x + h)


class Encoder(nn.Module):
    """Residual convolutional encoder: stem, stride-2 stages, 1x1 projection."""

    def __init__(self, arch: ArchConfig):
        super().__init__()
        chans = arch.stage_channels
        layers: list[nn.Module] = [
            nn.Conv2d(arch.in_channels, chans[0], 3, padding=1),
            _norm(chans[0]),
            nn.GELU(),
        ]
        prev = chans[0]
        for ch in chans:
            layers += [nn.Conv2d(prev, ch, 3, stride=2, padding=1), _norm(ch), nn.GELU()]
            layers += [ResidualBlock(ch) for _ in range(arch.blocks_per_stage)]
            prev = ch
        layers.append(nn.Conv2d(prev, arch.feature_channels, 1))
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class Decoder(nn.Module):
    """Transposed counterpart of the encoder, without the residual blocks."""

    def __init__(self, arch: ArchConfig):
        super().__init__()
        chans = arch.stage_channels
        layers: list[nn.Module] = [
            nn.Conv2d(arch.feature_channels, chans[-1], 1),
            _norm(chans[-1]),
            nn.GELU(),
        ]
        prev = chans[-1]
        for ch in reversed(chans):
            layers += [
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(prev, ch, 3, padding=1),
                _norm(ch),
                nn.GELU(),
            ]
            prev = ch
        layers.append(nn.Conv2d(prev, arch.in_channels, 3, padding=1))
        self.net = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.net(z))


class TransformHead(nn.Module):
    """Predicts a 2x3 normalized-coordinate transform from an ordered feature pair.

    The output layer is zero-initialized and a constant identity offset is
    added outside it, so a fresh head predicts the exact identity for every
    input. Inputs are concatenated on the channel axis, making the prediction
    input-order dependent. The trunk flattens its spatial map into the linear
    layers: pooling here would make the features translation-invariant and
    leave the head unable to read motion off the pair.
    """

    def __init__(self, arch: ArchConfig):
        super().__init__()
        ch = arch.thead_channels
        _, fh, fw = arch.feature_shape
        self.trunk = nn.Sequential(
            nn.Conv2d(2 * arch.feature_channels, ch, 3, padding=1),
            _norm(ch),
            nn.GELU(),
            nn.Conv2d(ch, ch, 3, padding=1),
            _norm(ch),
            nn.GELU(),
            nn.Flatten(),
            nn.Linear(ch * fh * fw, ch),
            nn.GELU(),
        )
        self.out = nn.Linear(ch, 6)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)
        self.register_buffer(
            "identity_offset", torch.tensor([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        )

    def forward(self, z1: torch.Tensor, z2: torch.Tensor) -> torch.Tensor:
        delta = self.out(self.trunk(torch.cat([z1, z2], dim=1))).view(-1, 2, 3)
        return delta + self.identity_offset


class SceneModel(nn.Module):
    """The four learnable functions plus the feature-space composition."""

    def __init__(self, arch: ArchConfig):
        arch.validate()
        super().__init__()
        self.arch = arch
        self.character_encoder = Encoder(arch)
        self.background_encoder = Encoder(arch)
        self.decoder = Decoder(arch)
        self.transform_head = TransformHead(arch)

    @property
    def feature_shape(self) -> tuple[int, int, int]:
        return self.arch.feature_shape

    def _check_image(self, x: torch.Tensor) -> None:
        if x.dim() != 4 or x.shape[1] != self.arch.in_channels:
            raise ShapeMismatch(f"expected (B, {self.arch.in_channels}, H, W), got {tuple(x.shape)}")
        if tuple(x.shape[2:]) != tuple(self.arch.image_size):
            raise ShapeMismatch(
                f"spatial size {tuple(x.shape[2:])} does not match configured canvas {self.arch.image_size}"
            )

    def encode_character(self, x: torch.Tensor) -> torch.Tensor:
        self._check_image(x)
        return self.character_encoder(x)

    def encode_background(self, x: torch.Tensor) -> torch.Tensor:
        self._check_image(x)
        return self.background_encoder(x)

    def predict_transform(self, z1: torch.Tensor, z2: torch.Tensor) -> torch.Tensor:
        if z1.shape != z2.shape:
            raise ShapeMismatch(f"feature shapes differ: {tuple(z1.shape)} vs {tuple(z2.shape)}")
        return self.transform_head(z1, z2)

    def apply_transform(self, theta: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
        return affine_feature_warp(theta, z)

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        if z.dim() != 4 or z.shape[1] != self.arch.feature_channels:
            raise ShapeMismatch(f"expected (B, {self.arch.feature_channels}, H', W'), got {tuple(z.shape)}")
        return self.decoder(z)

    def compose(
        self,
        x_c: torch.Tensor,
        x_t1: torch.Tensor,
        x_t2: torch.Tensor,
        x_b: torch.Tensor,
    ) -> torch.Tensor:
        """Render the character of x_c, moved as x_t1 -> x_t2, on the background of x_b."""
        theta = self.predict_transform(self.encode_character(x_t1), self.encode_character(x_t2))
        warped = self.apply_transform(theta, self.encode_character(x_c))
        return self.decode(warped + self.encode_background(x_b))


def build_model(arch: ArchConfig, seed: int = 0) -> SceneModel:
    """Deterministic construction: same (arch, seed) gives identical parameters."""
    torch.manual_seed(seed)
    return SceneModel(arch)


def image_to_tensor(img: np.ndarray, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """HxWx3 [0,1] array -> (1, 3, H, W) tensor."""
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeMismatch(f"expected HxWx3 image, got {img.shape}")
    return torch.from_numpy(np.ascontiguousarray(img.transpose(2, 0, 1))).to(dtype).unsqueeze(0)


def batch_to_tensor(imgs: list[np.ndarray], dtype: torch.dtype = torch.float32) -> torch.Tensor:
    arr = np.stack([img.transpose(2, 0, 1) for img in imgs]).astype(np.float32, copy=False)
    return torch.from_numpy(arr).to(dtype)


def tensor_to_image(t: torch.Tensor) -> np.ndarray:
    """(1, 3, H, W) or (3, H, W) tensor -> HxWx3 float64 array clipped to [0,1]."""
    if t.dim() == 4:
        t = t[0]
    arr = t.detach().cpu().double().numpy().transpose(1, 2, 0)
    return np.clip(arr, 0.0, 1.0)


def save_checkpoint(model: SceneModel, path: str | Path, extra: dict | None = None) -> Path:
    """Atomic write of arch config + parameters (+ optional metadata)."""
    path = Path(path)
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "arch": model.arch.to_json(),
        "state_dict": model.state_dict(),
        "extra": extra or {},
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    os.replace(tmp, path)
    return path


def load_checkpoint(path: str | Path) -> tuple[SceneModel, dict]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('format_version')}")
    model = SceneModel(ArchConfig.from_json(payload["arch"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload.get("extra", {})


def checkpoint_hash(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
