import json
from pathlib import Path

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from scenefactor.cli import load_run_config, main
from scenefactor.errors import InvalidConfig
from scenefactor.images import load_png, save_png
from scenefactor.model import build_model, save_checkpoint

from conftest import SMALL_ARCH


@pytest.fixture()
def runner():
    return CliRunner()


def test_help_exits_zero(runner):
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    assert "generate-data" in result.output


def test_unknown_subcommand_exits_2(runner):
    result = runner.invoke(main, ["frobnicate"])
    assert result.exit_code == 2


def test_config_precedence(tmp_path, monkeypatch):
    cfg_file = tmp_path / "config.yaml"
    cfg_file.write_text(yaml.safe_dump({"dataset": {"seed": 1, "num_clips": 5}}))
    monkeypatch.setenv("SCENEFACTOR_DATASET__SEED", "2")
    merged = load_run_config(str(cfg_file))
    assert merged["dataset"].seed == 2  # env beats file
    assert merged["dataset"].num_clips == 5
    merged = load_run_config(str(cfg_file), overrides=("dataset.seed=3",))
    assert merged["dataset"].seed == 3  # flag beats env


def test_config_rejects_unknown_keys(tmp_path):
    cfg_file = tmp_path / "config.yaml"
    cfg_file.write_text(yaml.safe_dump({"dataset": {"wibble": 1}}))
    with pytest.raises(InvalidConfig):
        load_run_config(str(cfg_file))
    cfg_file.write_text(yaml.safe_dump({"wibble": {}}))
    with pytest.raises(InvalidConfig):
        load_run_config(str(cfg_file))


def test_generate_data_writes_dataset_and_config_echo(tmp_path, runner):
    out = tmp_path / "ds"
    result = runner.invoke(
        main,
        [
            "generate-data",
            "--out",
            str(out),
            "--split",
            "train",
            "--set",
            "dataset.num_clips=2",
            "--set",
            "dataset.num_backgrounds=2",
            "--set",
            "dataset.seed=5",
        ],
    )
    assert result.exit_code == 0, result.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["clips"]) == 2
    echoed = yaml.safe_load((out / "effective_config.yaml").read_text())
    assert echoed["dataset"]["num_clips"] == 2
    assert echoed["dataset"]["seed"] == 5


def test_render_one_shot(tmp_path, runner, rng):
    ckpt = tmp_path / "model.pt"
    save_checkpoint(build_model(SMALL_ARCH, seed=0), ckpt)
    paths = []
    for name in ("a", "b"):
        p = tmp_path / f"{name}.png"
        save_png(rng.random((64, 64, 3)), p)
        paths.append(str(p))
    out = tmp_path / "out.png"
    result = runner.invoke(
        main,
        ["render", paths[0], paths[0], paths[1], paths[0], "--checkpoint", str(ckpt), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert load_png(out).shape == (64, 64, 3)


def test_train_cli_smoke(tmp_path, runner):
    data = tmp_path / "data"
    result = runner.invoke(
        main,
        [
            "generate-data",
            "--out",
            str(data),
            "--split",
            "train",
            "--set",
            "dataset.num_clips=2",
            "--set",
            "dataset.num_backgrounds=1",
            "--set",
            "dataset.canvas_size=[16, 16]",
            "--set",
            "dataset.digit_size=[8, 8]",
        ],
    )
    assert result.exit_code == 0, result.output

    out = tmp_path / "run"
    result = runner.invoke(
        main,
        [
            "train",
            "--data",
            str(data),
            "--out",
            str(out),
            "--set",
            "train.steps=2",
            "--set",
            "train.batch_size=2",
            "--set",
            "train.checkpoint_every=0",
            "--set",
            "arch.image_size=[16, 16]",
            "--set",
            "arch.stage_channels=[8]",
            "--set",
            "arch.blocks_per_stage=1",
            "--set",
            "arch.feature_channels=4",
            "--set",
            "arch.thead_channels=8",
        ],
    )
    assert result.exit_code == 0, result.output
    assert (out / "checkpoint_final.pt").exists()
    assert (out / "train_log.jsonl").exists()
    assert (out / "effective_config.yaml").exists()


def test_runtime_error_exits_1(tmp_path, runner):
    result = runner.invoke(main, ["train", "--data", str(tmp_path), "--out", str(tmp_path / "o")])
    assert result.exit_code == 1
    assert "manifest" in result.output


def _digit_canvas_16(runner, tmp_path):
    data = tmp_path / "data16"
    result = runner.invoke(
        main,
        [
            "generate-data",
            "--out",
            str(data),
            "--split",
            "test",
            "--set",
            "dataset.num_clips=3",
            "--set",
            "dataset.num_backgrounds=1",
        ],
    )
    assert result.exit_code == 0, result.output
    return data


def test_evaluate_cli_smoke(tmp_path, runner):
    data = _digit_canvas_16(runner, tmp_path)
    ckpt = tmp_path / "model.pt"
    save_checkpoint(build_model(SMALL_ARCH, seed=0), ckpt)
    out = tmp_path / "eval"
    result = runner.invoke(
        main,
        [
            "evaluate",
            "--checkpoint",
            str(ckpt),
            "--data",
            str(data),
            "--protocol",
            "no_object",
            "--n",
            "3",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    assert (out / "records.csv").exists()
    assert (out / "summary.json").exists()


def test_analyze_cli_smoke(tmp_path, runner):
    data = _digit_canvas_16(runner, tmp_path)
    ckpt = tmp_path / "model.pt"
    save_checkpoint(build_model(SMALL_ARCH, seed=0), ckpt)
    out = tmp_path / "tz"
    result = runner.invoke(
        main,
        [
            "analyze-tz",
            "--checkpoint",
            str(ckpt),
            "--data",
            str(data),
            "--digit",
            "5",
            "--n",
            "30",
            "--out",
            str(out),
            "--set",
            "analyze.num_clips=3",
        ],
    )
    assert result.exit_code == 0, result.output
    assert (out / "samples.csv").exists()
    assert (out / "regression_report.json").exists()
