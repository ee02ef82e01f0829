import numpy as np
import pytest
import torch

from scenefactor.errors import CheckpointError, InvalidConfig, ShapeMismatch
from scenefactor.model import (
    ArchConfig,
    batch_to_tensor,
    build_model,
    checkpoint_hash,
    image_to_tensor,
    load_checkpoint,
    save_checkpoint,
    tensor_to_image,
)

from conftest import MINI_ARCH


def test_feature_shape_config_propagates():
    # two stride-2 stages on 64x64 with 32 output channels: features are (32, 16, 16)
    arch = ArchConfig(image_size=(64, 64), stage_channels=(16, 24), feature_channels=32, blocks_per_stage=1)
    assert arch.feature_shape == (32, 16, 16)
    model = build_model(arch, 0)
    x = torch.rand(2, 3, 64, 64)
    z = model.encode_character(x)
    assert tuple(z.shape) == (2, 32, 16, 16)
    assert tuple(model.encode_background(x).shape) == (2, 32, 16, 16)


def test_arch_validation():
    with pytest.raises(InvalidConfig):
        ArchConfig(image_size=(60, 64)).validate()  # 60 not divisible by 8
    with pytest.raises(InvalidConfig):
        ArchConfig(stage_channels=(12,)).validate()  # group norm width
    ArchConfig(image_size=(8, 8), stage_channels=(8,), feature_channels=4).validate()


def test_encoders_deterministic_in_eval(mini_model):
    mini_model.eval()
    x = torch.rand(1, 3, 8, 8)
    assert torch.equal(mini_model.encode_character(x), mini_model.encode_character(x.clone()))
    assert torch.equal(mini_model.encode_background(x), mini_model.encode_background(x.clone()))


def test_character_and_background_encoders_disjoint(mini_model):
    x = torch.rand(1, 3, 8, 8)
    assert not torch.equal(mini_model.encode_character(x), mini_model.encode_background(x))


def test_encode_rejects_bad_shapes(mini_model):
    with pytest.raises(ShapeMismatch):
        mini_model.encode_character(torch.rand(1, 1, 8, 8))
    with pytest.raises(ShapeMismatch):
        mini_model.encode_character(torch.rand(1, 3, 7, 8))


def test_predict_transform_identity_at_init():
    model = build_model(MINI_ARCH, seed=99)
    eye = torch.tensor([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    for _ in range(100):
        z1 = torch.randn(1, 4, 4, 4)
        z2 = torch.randn(1, 4, 4, 4)
        theta = model.predict_transform(z1, z2)
        assert torch.equal(theta[0], eye)


def test_predict_transform_is_order_dependent(mini_model):
    # push the zero-initialized output layer off zero to expose the asymmetry
    model = build_model(MINI_ARCH, seed=5)
    with torch.no_grad():
        model.transform_head.out.weight.normal_(0, 0.1)
    z1 = torch.randn(1, 4, 4, 4)
    z2 = torch.randn(1, 4, 4, 4)
    assert not torch.allclose(model.predict_transform(z1, z2), model.predict_transform(z2, z1))


def test_predict_transform_output_finite(mini_model):
    theta = mini_model.predict_transform(torch.randn(3, 4, 4, 4), torch.randn(3, 4, 4, 4))
    assert theta.shape == (3, 2, 3)
    assert torch.isfinite(theta).all()


def test_predict_transform_shape_mismatch(mini_model):
    with pytest.raises(ShapeMismatch):
        mini_model.predict_transform(torch.randn(1, 4, 4, 4), torch.randn(1, 4, 2, 2))


def test_decode_shape_and_range(mini_model):
    z = torch.randn(2, 4, 4, 4)
    out = mini_model.decode(z)
    assert tuple(out.shape) == (2, 3, 8, 8)
    assert out.min() >= 0.0 and out.max() <= 1.0
    with pytest.raises(ShapeMismatch):
        mini_model.decode(torch.randn(1, 7, 4, 4))


def test_decoder_parameters_receive_gradient(mini_model):
    model = build_model(MINI_ARCH, seed=1)
    x = torch.rand(1, 3, 8, 8)
    out = model.decode(model.encode_character(x))
    loss = ((out - x) ** 2).mean()
    loss.backward()
    grads = [p.grad for p in model.decoder.parameters() if p.grad is not None]
    assert grads and any(g.abs().sum() > 0 for g in grads)


def test_encoder_input_gradient_matches_finite_differences():
    # 4x4 toy config, float64, central differences
    arch = ArchConfig(image_size=(4, 4), stage_channels=(8,), blocks_per_stage=1, feature_channels=4, thead_channels=8)
    model = build_model(arch, seed=7).double()
    torch.manual_seed(0)
    x = torch.rand(1, 3, 4, 4, dtype=torch.float64, requires_grad=True)
    model.encode_character(x).sum().backward()
    grad = x.grad.clone()
    h = 1e-4
    rng = np.random.default_rng(0)
    flat = x.detach().clone().reshape(-1)
    for k in map(int, rng.choice(flat.numel(), 12, replace=False)):
        xp = flat.clone()
        xp[k] += h
        xm = flat.clone()
        xm[k] -= h
        fp = model.encode_character(xp.reshape(1, 3, 4, 4)).sum().item()
        fm = model.encode_character(xm.reshape(1, 3, 4, 4)).sum().item()
        fd = (fp - fm) / (2 * h)
        ad = float(grad.reshape(-1)[k])
        assert abs(fd - ad) <= 1e-3 * max(abs(fd), abs(ad), 1e-6)


def test_compose_at_init_equals_decode_of_sum(mini_model):
    model = build_model(MINI_ARCH, seed=13)
    x = [torch.rand(1, 3, 8, 8) for _ in range(4)]
    composed = model.compose(*x)
    expected = model.decode(model.encode_character(x[0]) + model.encode_background(x[3]))
    assert torch.equal(composed, expected)
    assert composed.shape == x[0].shape


def test_build_model_deterministic():
    a = build_model(MINI_ARCH, seed=42)
    b = build_model(MINI_ARCH, seed=42)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)


def test_shape_closure_across_sizes():
    for size, stages in [((64, 64), (8, 8, 8)), ((32, 32), (8, 8)), ((16, 16), (8,))]:
        arch = ArchConfig(image_size=size, stage_channels=stages, blocks_per_stage=1, feature_channels=8)
        model = build_model(arch, 0)
        x = torch.rand(1, 3, *size)
        z = model.encode_character(x)
        warped = model.apply_transform(torch.tensor([[[1.0, 0, 0], [0, 1.0, 0]]]), z)
        out = model.decode(warped + model.encode_background(x))
        assert out.shape == x.shape


def test_checkpoint_round_trip(tmp_path, mini_model):
    path = tmp_path / "model.pt"
    save_checkpoint(mini_model, path, extra={"step": 7})
    loaded, extra = load_checkpoint(path)
    assert extra["step"] == 7
    assert loaded.arch == mini_model.arch
    for pa, pb in zip(mini_model.parameters(), loaded.parameters()):
        assert torch.equal(pa, pb)
    assert len(checkpoint_hash(path)) == 64


def test_checkpoint_errors(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.pt")
    bad = tmp_path / "bad.pt"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)


def test_image_tensor_bridge(rng):
    img = rng.random((8, 8, 3))
    t = image_to_tensor(img)
    assert t.shape == (1, 3, 8, 8)
    back = tensor_to_image(t)
    assert np.allclose(back, img, atol=1e-6)
    with pytest.raises(ShapeMismatch):
        image_to_tensor(rng.random((8, 8)))
