import numpy as np
import pytest
import torch

from scenefactor.clips import DatasetConfig, generate_dataset
from scenefactor.digits import load_digit_pool
from scenefactor.model import ArchConfig, build_model

torch.set_num_threads(2)

MINI_ARCH = ArchConfig(
    image_size=(8, 8), stage_channels=(8,), blocks_per_stage=1, feature_channels=4, thead_channels=8
)

SMALL_ARCH = ArchConfig(
    image_size=(64, 64), stage_channels=(8, 8), blocks_per_stage=1, feature_channels=8, thead_channels=8
)


@pytest.fixture(scope="session")
def digit_pool():
    return load_digit_pool("builtin")


@pytest.fixture(scope="session")
def small_dataset(digit_pool):
    config = DatasetConfig(num_backgrounds=4, num_clips=6, seed=11)
    backgrounds, clips = generate_dataset(config, "train", digit_pool)
    return config, backgrounds, clips


@pytest.fixture(scope="session")
def small_model():
    return build_model(SMALL_ARCH, seed=3)


@pytest.fixture(scope="session")
def mini_model():
    return build_model(MINI_ARCH, seed=3)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
