"""scenefactor: self-supervised factorization of video into background, character, and animation."""

__version__ = "0.1.0"

from .affine import StepTransform, sample_step_transform
from .backgrounds import BackgroundSpec, DiamondSpec, generate_backgrounds, render_background
from .clips import (
    DatasetConfig,
    FramePair,
    VideoClip,
    compose_frame,
    composite_sprite,
    generate_clip,
    generate_dataset,
    sample_training_pair,
)
from .dataset_io import Dataset, read_dataset, write_dataset
from .digits import DigitPool, load_digit_pool
from .model import ArchConfig, SceneModel, build_model, load_checkpoint, save_checkpoint
from .training import TrainConfig, total_loss, train
from .warp import affine_feature_warp

__all__ = [
    "ArchConfig",
    "BackgroundSpec",
    "Dataset",
    "DatasetConfig",
    "DiamondSpec",
    "DigitPool",
    "FramePair",
    "SceneModel",
    "StepTransform",
    "TrainConfig",
    "VideoClip",
    "affine_feature_warp",
    "build_model",
    "compose_frame",
    "composite_sprite",
    "generate_backgrounds",
    "generate_clip",
    "generate_dataset",
    "load_checkpoint",
    "load_digit_pool",
    "read_dataset",
    "render_background",
    "sample_step_transform",
    "sample_training_pair",
    "save_checkpoint",
    "total_loss",
    "train",
    "write_dataset",
]
