import math

import numpy as np
import pytest

from scenefactor import affine


def test_identity_and_translation():
    assert np.array_equal(affine.identity(), [[1, 0, 0], [0, 1, 0]])
    t = affine.translation(3, -4)
    assert np.array_equal(t[:, 2], [3, -4])


def test_compose_matches_3x3_multiplication(rng):
    for _ in range(50):
        a = rng.normal(size=(2, 3))
        b = rng.normal(size=(2, 3))
        a3 = np.vstack([a, [0, 0, 1]])
        b3 = np.vstack([b, [0, 0, 1]])
        expected = (a3 @ b3)[:2]
        assert np.allclose(affine.compose(a, b), expected, atol=1e-12)


def test_invert_round_trip(rng):
    for _ in range(50):
        t = rng.normal(size=(2, 3)) + np.array([[1, 0, 0], [0, 1, 0]])
        if abs(np.linalg.det(t[:, :2])) < 1e-3:
            continue
        round_trip = affine.compose(t, affine.invert(t))
        assert np.allclose(round_trip, affine.identity(), atol=1e-9)


def test_rotation_about_fixes_center():
    center = (10.5, 20.25)
    r = affine.rotation_about(0.7, center)
    moved = affine.apply_points(r, np.array([center]))[0]
    assert np.allclose(moved, center, atol=1e-12)
    # a point at distance d stays at distance d
    p = np.array([center[0] + 3.0, center[1]])
    q = affine.apply_points(r, p[None])[0]
    assert math.isclose(np.hypot(*(q - center)), 3.0, rel_tol=1e-12)


def test_step_transform_value_sets():
    assert set(affine.ROTATION_ANGLES) == {-15, -12, -9, -6, -3, 3, 6, 9, 12, 15}
    assert set(affine.SHIFT_VALUES) == {-10, -8, -6, -4, -2, 2, 4, 6, 8, 10}
    with pytest.raises(ValueError):
        affine.StepTransform("rotation", angle_degrees=0)
    with pytest.raises(ValueError):
        affine.StepTransform("rotation", angle_degrees=7)
    with pytest.raises(ValueError):
        affine.StepTransform("translation", shift=(0, 4))
    with pytest.raises(ValueError):
        affine.StepTransform("warp")


def test_sample_step_covers_legal_values_and_never_zero(rng):
    angles = set()
    shifts_x = set()
    shifts_y = set()
    kinds = {"rotation": 0, "translation": 0}
    joint = set()
    for _ in range(10_000):
        step = affine.sample_step_transform(rng)
        kinds[step.kind] += 1
        if step.kind == "rotation":
            assert step.angle_degrees != 0
            angles.add(step.angle_degrees)
        else:
            assert step.shift[0] != 0 and step.shift[1] != 0
            shifts_x.add(step.shift[0])
            shifts_y.add(step.shift[1])
            joint.add(step.shift)
    assert angles == set(affine.ROTATION_ANGLES)
    assert shifts_x == set(affine.SHIFT_VALUES)
    assert shifts_y == set(affine.SHIFT_VALUES)
    # dx and dy drawn independently: all 100 combinations show up
    assert len(joint) == len(affine.SHIFT_VALUES) ** 2
    # rough 50/50 kind split (chi-square-style sanity, 6 sigma)
    assert abs(kinds["rotation"] - 5000) < 6 * 50


def test_sample_step_frequencies_roughly_uniform(rng):
    counts = {a: 0 for a in affine.ROTATION_ANGLES}
    n_rot = 0
    for _ in range(20_000):
        step = affine.sample_step_transform(rng)
        if step.kind == "rotation":
            counts[step.angle_degrees] += 1
            n_rot += 1
    expected = n_rot / len(counts)
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    # 9 dof; 99.9th percentile is ~27.9
    assert chi2 < 35


def test_step_json_round_trip():
    for step in (affine.StepTransform("rotation", angle_degrees=-12), affine.StepTransform("translation", shift=(4, -10))):
        assert affine.StepTransform.from_json(step.to_json()) == step


def test_apply_step_rotation_about_current_center():
    placement = affine.translation(10, 6)
    center_local = (13.5, 13.5)
    step = affine.StepTransform("rotation", angle_degrees=9)
    new_placement = affine.apply_step(placement, step, center_local)
    # the digit's center is a fixed point of a rotation step
    center_canvas = affine.apply_points(placement, np.array([center_local]))[0]
    moved = affine.apply_points(new_placement, np.array([center_local]))[0]
    assert np.allclose(moved, center_canvas, atol=1e-12)
