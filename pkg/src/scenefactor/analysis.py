"""Structure of the learned feature-space transform against ground truth.

Compares predicted transforms (normalized-coordinate convention, from the
transform head) with the generator's ground-truth character motions (canvas
pixel convention): translation norms, nearest-rotation angles via SVD,
singular-value statistics, and a 6-to-6 linear regression with r².
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .backgrounds import BackgroundSpec
from .clips import DatasetConfig, VideoClip, generate_clip
from .digits import DigitInstance, DigitPool
from .errors import EmptyInput, InsufficientPairs, InvalidConfig, RankDeficient, SingularBlock
from .model import SceneModel, batch_to_tensor


@dataclass(frozen=True)
class TransformPairSample:
    tx: np.ndarray  # ground truth, canvas pixel convention
    tz: np.ndarray  # predicted, normalized convention
    tz_pixel: np.ndarray  # tz conjugated into feature-cell pixel convention
    label: int
    ids: tuple  # (clip_id, i, j)


@dataclass(frozen=True)
class RegressionReport:
    coefficients: np.ndarray  # (6, 6), maps flattened source to flattened target
    intercept: np.ndarray  # (6,)
    r2: float
    n: int
    direction: str


@dataclass(frozen=True)
class DensityReport:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float


def translation_norm(t: np.ndarray) -> float:
    """Euclidean norm of the third column (the translation parameters)."""
    t = np.asarray(t, dtype=np.float64)
    return float(math.hypot(t[0, 2], t[1, 2]))


def ground_truth_angle(t: np.ndarray) -> float:
    """Rotation angle read off the first column of the 2x2 block."""
    t = np.asarray(t, dtype=np.float64)
    return float(math.atan2(t[1, 0], t[0, 0]))


def nearest_rotation_angle(t: np.ndarray) -> float:
    """Angle of the best-approximating proper rotation of the 2x2 block.

    SVD-based orthogonal Procrustes: A = U S V^T, R = U V^T, with the
    smaller-singular-value column of U sign-flipped first when det(R) < 0.
    The block is pre-normalized by its Frobenius norm so the recovered angle
    is invariant to positive scaling.
    """
    block = np.asarray(t, dtype=np.float64)[:2, :2]
    scale = float(np.linalg.norm(block))
    if scale == 0.0:
        raise SingularBlock("2x2 block is zero")
    block = block / scale
    u, s, vt = np.linalg.svd(block)
    if s[1] <= 1e-12 * s[0]:
        raise SingularBlock(f"2x2 block is singular (singular values {s * scale})")
    if np.linalg.det(u @ vt) < 0:
        u = u.copy()
        u[:, 1] = -u[:, 1]
    r = u @ vt
    return float(math.atan2(r[1, 0], r[0, 0]))


def largest_singular_value(t: np.ndarray) -> float:
    block = np.asarray(t, dtype=np.float64)[:2, :2]
    return float(np.linalg.svd(block, compute_uv=False)[0])


def convert_convention(t_norm: np.ndarray, extent: tuple[int, int], to: str = "pixel") -> np.ndarray:
    """Conjugate a 2x3 map between normalized [-1, 1] and pixel coordinates.

    extent is (height, width) of the grid the normalized coordinates span
    (corner-aligned). to="pixel" converts normalized -> pixel; to="normalized"
    inverts the conversion. Closed form, exact on the identity.
    """
    if extent[0] < 2 or extent[1] < 2:
        raise InvalidConfig(f"extent must be >= 2 per axis, got {extent}")
    t = np.asarray(t_norm, dtype=np.float64)
    a, b, tx = t[0]
    c, d, ty = t[1]
    sx = 2.0 / (extent[1] - 1)
    sy = 2.0 / (extent[0] - 1)
    if to == "pixel":
        return np.array(
            [
                [a, b * (sy / sx), (tx + ((1.0 - a) - b)) / sx],
                [c * (sx / sy), d, (ty + ((1.0 - d) - c)) / sy],
            ]
        )
    if to == "normalized":
        return np.array(
            [
                [a, b * (sx / sy), tx * sx - ((1.0 - a) - b * (sx / sy))],
                [c * (sy / sx), d, ty * sy - ((1.0 - d) - c * (sy / sx))],
            ]
        )
    raise InvalidConfig(f"unknown conversion target {to!r}")


def generate_analysis_clips(
    digit: DigitInstance,
    background: BackgroundSpec,
    num_clips: int,
    seed: int,
    frames_per_clip: int = 5,
    canvas_size: tuple[int, int] = (64, 64),
) -> list[VideoClip]:
    """Fresh clips of one fixed character instance on one fixed background."""
    pool = DigitPool([digit])
    config = DatasetConfig(
        num_backgrounds=1,
        num_clips=num_clips,
        frames_per_clip=frames_per_clip,
        digits_per_clip=1,
        canvas_size=canvas_size,
        digit_size=digit.image.shape,
        seed=seed,
    )
    clips = []
    for idx in range(num_clips):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 31, idx]))
        clips.append(generate_clip(config, [background], pool, rng, clip_id=f"tz_{idx:05d}"))
    return clips


def collect_pairs(
    model: SceneModel, clips: list[VideoClip], n: int, seed: int = 0, batch_size: int = 256
) -> list[TransformPairSample]:
    """n unique (clip, i, j) frame pairs with ground-truth and predicted transforms."""
    combos: list[tuple[int, int, int]] = []
    for ci, clip in enumerate(clips):
        if len(clip.characters) != 1:
            raise InvalidConfig("transform analysis needs single-character clips")
        m = clip.num_frames
        combos.extend((ci, i, j) for i in range(m) for j in range(m) if i != j)
    if n > len(combos):
        raise InsufficientPairs(f"requested {n} pairs, only {len(combos)} available")
    rng = np.random.default_rng(seed)
    chosen = [combos[k] for k in rng.choice(len(combos), size=n, replace=False)]

    needed_clips = sorted({ci for ci, _, _ in chosen})
    features: dict[int, torch.Tensor] = {}
    model.eval()
    with torch.inference_mode():
        for ci in needed_clips:
            features[ci] = model.encode_character(batch_to_tensor(clips[ci].frames))

    extent = model.feature_shape[1:]
    samples: list[TransformPairSample] = []
    with torch.inference_mode():
        for lo in range(0, len(chosen), batch_size):
            chunk = chosen[lo : lo + batch_size]
            z1 = torch.stack([features[ci][i] for ci, i, _ in chunk])
            z2 = torch.stack([features[ci][j] for ci, _, j in chunk])
            thetas = model.predict_transform(z1, z2).double().numpy()
            for (ci, i, j), tz in zip(chunk, thetas):
                clip = clips[ci]
                tx = clip.relative_transform(i, j)
                samples.append(
                    TransformPairSample(
                        tx=tx,
                        tz=tz,
                        tz_pixel=convert_convention(tz, extent, to="pixel"),
                        label=clip.characters[0].digit.label,
                        ids=(clip.clip_id, i, j),
                    )
                )
    return samples


def fit_regression(
    samples: list[TransformPairSample], direction: str = "tx_to_tz", intercept: bool = True
) -> RegressionReport:
    """Ordinary least squares between the flattened 6-parameter transforms.

    r² is the uniform-average coefficient of determination across the six
    outputs. Solved by orthogonal factorization (numpy lstsq).
    """
    if len(samples) < 7:
        raise RankDeficient(f"need at least 7 samples, got {len(samples)}")
    xs = np.stack([s.tx.ravel() for s in samples])
    ys = np.stack([s.tz.ravel() for s in samples])
    if direction == "tz_to_tx":
        xs, ys = ys, xs
    elif direction != "tx_to_tz":
        raise InvalidConfig(f"unknown regression direction {direction!r}")
    if np.allclose(xs.std(axis=0), 0.0):
        raise RankDeficient("design has no variation")

    # Rigid-motion ground truths span only 4 of the 6 entries (d = a, c = -b),
    # so the design is usually rank deficient; lstsq's minimum-norm solution
    # handles that, and the error above is reserved for a truly empty design.
    design = np.hstack([xs, np.ones((len(xs), 1))]) if intercept else xs
    solution, *_ = np.linalg.lstsq(design, ys, rcond=None)
    if intercept:
        coef, offset = solution[:-1], solution[-1]
    else:
        coef, offset = solution, np.zeros(ys.shape[1])

    pred = xs @ coef + offset
    ss_res = ((ys - pred) ** 2).sum(axis=0)
    ss_tot = ((ys - ys.mean(axis=0)) ** 2).sum(axis=0)
    per_output = np.where(ss_tot > 0, 1.0 - ss_res / np.where(ss_tot > 0, ss_tot, 1.0), (ss_res <= 1e-30) * 1.0)
    return RegressionReport(
        coefficients=coef.T, intercept=offset, r2=float(per_output.mean()), n=len(samples), direction=direction
    )


def density_report(values: np.ndarray, grid: np.ndarray) -> DensityReport:
    """Gaussian-kernel density estimate on a fixed grid, Scott's-rule bandwidth."""
    from scipy.stats import gaussian_kde

    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise EmptyInput("need at least two values for a density estimate")
    if np.std(values) == 0.0:
        raise EmptyInput("density of a constant sample is degenerate")
    kde = gaussian_kde(values)  # Scott's rule is scipy's default
    return DensityReport(grid=np.asarray(grid, dtype=np.float64), density=kde(grid), bandwidth=float(kde.factor))


def rotation_scatter_slope(samples: list[TransformPairSample]) -> tuple[float, float]:
    """Least-squares line through (tx angle, tz nearest-rotation angle); returns (slope, intercept)."""
    gt = np.array([ground_truth_angle(s.tx) for s in samples])
    pred = np.array([nearest_rotation_angle(s.tz) for s in samples])
    slope, offset = np.polyfit(gt, pred, 1)
    return float(slope), float(offset)


def write_sample_table(samples: list[TransformPairSample], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = (
            [f"tx_{k}" for k in range(6)]
            + [f"tz_{k}" for k in range(6)]
            + [f"tz_pixel_{k}" for k in range(6)]
            + ["tx_norm", "tz_norm", "tx_angle", "tz_angle", "label", "clip_id", "i", "j"]
        )
        writer.writerow(header)
        for s in samples:
            writer.writerow(
                [f"{v:.10g}" for v in s.tx.ravel()]
                + [f"{v:.10g}" for v in s.tz.ravel()]
                + [f"{v:.10g}" for v in s.tz_pixel.ravel()]
                + [
                    f"{translation_norm(s.tx):.10g}",
                    f"{translation_norm(s.tz):.10g}",
                    f"{ground_truth_angle(s.tx):.10g}",
                    f"{nearest_rotation_angle(s.tz):.10g}",
                    s.label,
                    s.ids[0],
                    s.ids[1],
                    s.ids[2],
                ]
            )


def run_transform_analysis(
    model: SceneModel, clips: list[VideoClip], n: int, out_dir: str | Path, seed: int = 0
) -> dict:
    """Collect pairs, fit the regression, and write tables, report, and plots.

    Returns the report dict. The translation-norm figure keeps the caveat that
    only the third column is read as translation even though other entries of
    the learned transform can contribute to translation once maps compose.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    samples = collect_pairs(model, clips, n, seed=seed)
    write_sample_table(samples, out / "samples.csv")

    regression = fit_regression(samples)
    slope, offset = rotation_scatter_slope(samples)
    tx_norms = np.array([translation_norm(s.tx) for s in samples])
    tz_norms = np.array([translation_norm(s.tz) for s in samples])
    tx_angles = np.array([ground_truth_angle(s.tx) for s in samples])
    tz_angles = np.array([nearest_rotation_angle(s.tz) for s in samples])
    top_singulars = np.array([largest_singular_value(s.tz) for s in samples])

    report = {
        "n": len(samples),
        "labels": sorted({int(s.label) for s in samples}),
        "regression_r2": regression.r2,
        "regression_direction": regression.direction,
        "rotation_slope": slope,
        "rotation_intercept": offset,
        "translation_norm_caveat": (
            "only the third column is read as translation; other entries of the "
            "learned transform may also move content once maps compose"
        ),
    }
    (out / "regression_report.json").write_text(
        json.dumps(
            {
                **report,
                "coefficients": regression.coefficients.tolist(),
                "intercept": regression.intercept.tolist(),
            },
            indent=2,
        )
    )

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(tx_norms, tz_norms, s=4, alpha=0.3)
    ax.set_xlabel("ground-truth translation norm (px)")
    ax.set_ylabel("predicted translation norm (normalized)")
    fig.tight_layout()
    fig.savefig(out / "translation_norms.png", dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(np.degrees(tx_angles), np.degrees(tz_angles), s=4, alpha=0.3)
    lim = max(1.0, np.abs(np.degrees(tx_angles)).max())
    ax.plot([-lim, lim], [-lim, lim], "k--", lw=1, label="identity")
    ax.set_xlabel("ground-truth rotation angle (deg)")
    ax.set_ylabel("recovered rotation angle (deg)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "rotation_angles.png", dpi=120)
    plt.close(fig)

    for values, stem, label in (
        (top_singulars, "singular_value_density", "largest singular value of predicted transform"),
        (np.array([s.tz[0, 0] for s in samples]), "top_left_entry_density", "top-left entry of predicted transform"),
    ):
        try:
            grid = np.linspace(values.min() - 0.2, values.max() + 0.2, 256)
            density = density_report(values, grid)
        except EmptyInput:
            continue  # constant predictions (e.g. untrained model) have no density
        fig, ax = plt.subplots(figsize=(5, 4))
        ax.plot(density.grid, density.density)
        ax.set_xlabel(label)
        ax.set_ylabel("density")
        fig.tight_layout()
        fig.savefig(out / f"{stem}.png", dpi=120)
        plt.close(fig)

    return report
