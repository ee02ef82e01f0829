"""Single entry point dispatching to all workflows, with shared config handling.

Configuration precedence: command-line overrides (--set section.key=value)
beat SCENEFACTOR_<SECTION>__<KEY> environment variables, which beat the YAML
config file, which beats the dataclass defaults. Unknown keys are rejected.
The post-merge effective config is echoed into every output directory.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from .analysis import generate_analysis_clips, run_transform_analysis
from .clips import DatasetConfig
from .dataset_io import read_dataset, write_dataset
from .digits import load_digit_pool
from .errors import InvalidConfig, SceneFactorError
from .evaluation import EvalConfig, run_evaluation
from .images import load_png, save_png
from .model import ArchConfig, batch_to_tensor, load_checkpoint, tensor_to_image
from .training import TrainConfig, train

ENV_PREFIX = "SCENEFACTOR_"

SECTION_TYPES = {
    "dataset": DatasetConfig,
    "arch": ArchConfig,
    "train": TrainConfig,
    "evaluate": EvalConfig,
    "analyze": dict,  # free-form: digit, n, num_clips, seed
}

ANALYZE_DEFAULTS = {"digit": 5, "n": 5000, "num_clips": 300, "seed": 500}


def _coerce(value: str):
    return yaml.safe_load(value)


def _dataclass_fields(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _build_section(name: str, values: dict):
    cls = SECTION_TYPES[name]
    if cls is dict:
        defaults = dict(ANALYZE_DEFAULTS)
        unknown = set(values) - set(defaults)
        if unknown:
            raise InvalidConfig(f"unknown keys in section {name!r}: {sorted(unknown)}")
        defaults.update(values)
        return defaults
    known = _dataclass_fields(cls)
    unknown = set(values) - known
    if unknown:
        raise InvalidConfig(f"unknown keys in section {name!r}: {sorted(unknown)}")
    coerced = {}
    for field in dataclasses.fields(cls):
        if field.name not in values:
            continue
        v = values[field.name]
        if isinstance(v, list):
            v = tuple(v)
        coerced[field.name] = v
    return cls(**coerced)


def load_run_config(config_path: str | None, overrides: tuple[str, ...] = ()) -> dict:
    """Merge file, environment, and --set overrides into typed sections."""
    raw: dict[str, dict] = {name: {} for name in SECTION_TYPES}
    if config_path:
        loaded = yaml.safe_load(Path(config_path).read_text()) or {}
        unknown = set(loaded) - set(SECTION_TYPES)
        if unknown:
            raise InvalidConfig(f"unknown config sections: {sorted(unknown)}")
        for section, values in loaded.items():
            if not isinstance(values, dict):
                raise InvalidConfig(f"section {section!r} must be a mapping")
            raw[section].update(values)

    for key, value in os.environ.items():
        if not key.startswith(ENV_PREFIX) or "__" not in key:
            continue
        section, _, field = key[len(ENV_PREFIX) :].lower().partition("__")
        if section in raw:
            raw[section][field] = _coerce(value)

    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise InvalidConfig(f"override must look like section.key=value, got {item!r}")
        dotted, _, value = item.partition("=")
        section, _, field = dotted.partition(".")
        if section not in raw:
            raise InvalidConfig(f"unknown config section {section!r}")
        raw[section][field] = _coerce(value)

    return {name: _build_section(name, values) for name, values in raw.items()}


def echo_config(out_dir: str | Path, config: dict) -> None:
    """Write the post-merge configuration next to the artifacts it produced."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {}
    for name, section in config.items():
        payload[name] = section if isinstance(section, dict) else section.to_json()
    (out / "effective_config.yaml").write_text(yaml.safe_dump(payload, sort_keys=True))


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


@click.group()
def main() -> None:
    """Scene factorization toolkit: data generation, training, evaluation, analysis, serving."""


@main.command("generate-data")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--split", type=click.Choice(["train", "val", "test"]), required=True)
@click.option("--set", "overrides", multiple=True, help="section.key=value override")
def generate_data(config_path, out_dir, split, overrides) -> None:
    """Generate a split of the synthetic benchmark and persist it."""
    try:
        cfg = load_run_config(config_path, overrides)
        dataset_cfg: DatasetConfig = cfg["dataset"]
        pool = load_digit_pool(dataset_cfg.digit_source, size=dataset_cfg.digit_size)
        from .clips import generate_dataset

        _, clips = generate_dataset(dataset_cfg, split, pool)
        write_dataset(out_dir, clips, dataset_cfg, split)
        echo_config(out_dir, {"dataset": dataset_cfg})
        click.echo(f"wrote {len(clips)} clips to {out_dir}")
    except (SceneFactorError, OSError) as exc:
        _fail(exc)


@main.command("train")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--set", "overrides", multiple=True)
def train_cmd(config_path, data_dir, out_dir, overrides) -> None:
    """Train the model on a generated dataset."""
    try:
        cfg = load_run_config(config_path, overrides)
        dataset = read_dataset(data_dir)
        echo_config(out_dir, {"train": cfg["train"], "arch": cfg["arch"]})
        final = train(cfg["train"], cfg["arch"], dataset.clips, out_dir)
        click.echo(f"final checkpoint: {final}")
    except (SceneFactorError, OSError) as exc:
        _fail(exc)


@main.command("evaluate")
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--protocol", default="all", help="one protocol name or 'all'")
@click.option("--n", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--set", "overrides", multiple=True)
def evaluate_cmd(checkpoint, data_dir, protocol, n, out_dir, overrides) -> None:
    """Run the quantitative protocols against a dataset."""
    try:
        cfg = load_run_config(None, overrides)
        eval_cfg: EvalConfig = cfg["evaluate"]
        if protocol != "all":
            eval_cfg = dataclasses.replace(eval_cfg, protocols=(protocol,))
        if n is not None:
            eval_cfg = dataclasses.replace(eval_cfg, n=n)
        model, _ = load_checkpoint(checkpoint)
        dataset = read_dataset(data_dir)
        summary = run_evaluation(model, dataset, eval_cfg, out_dir)
        echo_config(out_dir, {"evaluate": eval_cfg})
        click.echo(json.dumps(summary, indent=2))
    except (SceneFactorError, OSError) as exc:
        _fail(exc)


@main.command("analyze-tz")
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True), default=None,
              help="dataset dir supplying canvas/digit config; defaults used otherwise")
@click.option("--digit", type=int, default=None)
@click.option("--n", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--set", "overrides", multiple=True)
def analyze_tz_cmd(checkpoint, data_dir, digit, n, out_dir, overrides) -> None:
    """Analyze the learned transform against ground truth on fixed-character clips."""
    try:
        cfg = load_run_config(None, overrides)
        analyze = dict(cfg["analyze"])
        if digit is not None:
            analyze["digit"] = digit
        if n is not None:
            analyze["n"] = n
        dataset_cfg = read_dataset(data_dir).config if data_dir else cfg["dataset"]

        from .backgrounds import generate_backgrounds

        pool = load_digit_pool(dataset_cfg.digit_source, size=dataset_cfg.digit_size).filter_label(analyze["digit"])
        background = generate_backgrounds(1, analyze["seed"], "test", dataset_cfg.canvas_size)[0]
        clips = generate_analysis_clips(
            pool[0],
            background,
            num_clips=analyze["num_clips"],
            seed=analyze["seed"],
            frames_per_clip=dataset_cfg.frames_per_clip,
            canvas_size=dataset_cfg.canvas_size,
        )
        model, _ = load_checkpoint(checkpoint)
        report = run_transform_analysis(model, clips, analyze["n"], out_dir, seed=analyze["seed"])
        echo_config(out_dir, {"analyze": analyze})
        click.echo(json.dumps(report, indent=2))
    except (SceneFactorError, OSError) as exc:
        _fail(exc)


@main.command("serve")
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--data", "data_dir", type=click.Path(exists=True), default=None)
@click.option("--bind", default=None, help="host:port (env SCENEFACTOR_BIND overrides default)")
def serve_cmd(checkpoint, data_dir, bind) -> None:
    """Serve composition over HTTP."""
    from .service import serve

    try:
        bind = bind or os.environ.get("SCENEFACTOR_BIND", "127.0.0.1:8000")
        serve(checkpoint, data_dir, bind)
    except (SceneFactorError, OSError) as exc:
        _fail(exc)


@main.command("render")
@click.argument("x_c", type=click.Path(exists=True))
@click.argument("x_t1", type=click.Path(exists=True))
@click.argument("x_t2", type=click.Path(exists=True))
@click.argument("x_b", type=click.Path(exists=True))
@click.option("--checkpoint", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def render_cmd(x_c, x_t1, x_t2, x_b, checkpoint, out_path) -> None:
    """One-shot composition from four image files (headless counterpart of the UI)."""
    import torch

    try:
        model, _ = load_checkpoint(checkpoint)
        imgs = [load_png(p) for p in (x_c, x_t1, x_t2, x_b)]
        with torch.inference_mode():
            out = model.compose(*(batch_to_tensor([img]) for img in imgs))
        save_png(tensor_to_image(out), out_path)
        click.echo(f"wrote {out_path}")
    except (SceneFactorError, OSError) as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
