import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenefactor.dataset_io import decode_rle, encode_rle, read_dataset, write_dataset
from scenefactor.errors import FormatVersionMismatch, NotADataset


@given(st.lists(st.booleans(), min_size=1, max_size=200))
@settings(max_examples=200, deadline=None)
def test_rle_round_trip(bits):
    mask = np.asarray(bits, dtype=bool).reshape(1, -1)
    assert np.array_equal(decode_rle(encode_rle(mask), mask.shape), mask)


def test_rle_2d(rng):
    mask = rng.random((64, 64)) > 0.5
    assert np.array_equal(decode_rle(encode_rle(mask), mask.shape), mask)


def test_round_trip_preserves_metadata_exactly(tmp_path, small_dataset):
    config, _, clips = small_dataset
    write_dataset(tmp_path / "ds", clips, config, "train")
    loaded = read_dataset(tmp_path / "ds")

    assert loaded.split == "train"
    assert loaded.config == config
    assert len(loaded.clips) == len(clips)
    for orig, back in zip(clips, loaded.clips):
        assert back.clip_id == orig.clip_id
        assert back.background == orig.background
        for t_orig, t_back in zip(orig.characters, back.characters):
            assert t_back.steps == t_orig.steps
            assert t_back.initial_offset == t_orig.initial_offset
            assert t_back.digit.label == t_orig.digit.label
            # matrices reproduce exactly
            for p_orig, p_back in zip(t_orig.placements, t_back.placements):
                assert np.array_equal(p_orig, p_back)
        for m_orig, m_back in zip(orig.masks, back.masks):
            assert np.array_equal(m_orig, m_back)


def test_round_trip_images_within_quantization(tmp_path, small_dataset):
    config, _, clips = small_dataset
    write_dataset(tmp_path / "ds", clips, config, "train")
    loaded = read_dataset(tmp_path / "ds")
    for orig, back in zip(clips, loaded.clips):
        for f_orig, f_back in zip(orig.frames, back.frames):
            assert np.abs(f_orig - f_back).max() <= 1.0 / 255.0
        assert np.abs(orig.background_render - back.background_render).max() <= 1.0 / 255.0


def test_manifest_lists_all_clips(tmp_path, small_dataset):
    config, _, clips = small_dataset
    root = write_dataset(tmp_path / "ds", clips, config, "train")
    manifest = json.loads((root / "manifest.json").read_text())
    assert len(manifest["clips"]) == len(clips)


def test_read_empty_directory_raises(tmp_path):
    with pytest.raises(NotADataset):
        read_dataset(tmp_path)


def test_read_wrong_version_raises(tmp_path, small_dataset):
    config, _, clips = small_dataset
    root = write_dataset(tmp_path / "ds", clips[:1], config, "train")
    manifest = json.loads((root / "manifest.json").read_text())
    manifest["format_version"] = 999
    (root / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(FormatVersionMismatch):
        read_dataset(root)
