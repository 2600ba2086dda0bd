"""Evaluation metrics (PSNR, SSIM, FID, NME) and the bucketed harness."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .imaging import (
    COVERAGE_LABELS,
    CorruptedImage,
    Image,
    LandmarkSet,
    Mask,
    apply_mask,
    composite,
    coverage_bucket,
    generate_block_mask,
    generate_center_mask,
    render_landmark_map,
    to_unit,
)

PSNR_CAP_DB = 100.0


def _pixels(image) -> np.ndarray:
    return image.pixels if hasattr(image, "pixels") else np.asarray(image)


def psnr(a, b, mask: Mask | None = None) -> float:
    """Peak signal-to-noise ratio in dB on [0, 1]-mapped pixels, capped at
    100 dB; with `mask`, restricted to the hole region."""
    pa, pb = _pixels(a), _pixels(b)
    if pa.shape != pb.shape:
        raise ValueError(f"shape mismatch: {pa.shape} vs {pb.shape}")
    diff = to_unit(pa) - to_unit(pb)
    if mask is not None:
        hole = mask.pixels.astype(bool)
        if not hole.any():
            raise ValueError("mask has no hole pixels to score")
        diff = diff[hole]
    mse = float(np.mean(diff.astype(np.float64) ** 2))
    if mse <= 10 ** (-PSNR_CAP_DB / 10):
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = size // 2
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2 * sigma**2))
    window = np.outer(g, g)
    return window / window.sum()


def ssim(a, b, window_size: int = 11, sigma: float = 1.5) -> float:
    """Mean structural similarity over valid 11x11 Gaussian windows.

    Standard stabilizers C1 = 0.01^2, C2 = 0.03^2 on the [0, 1] range;
    channels are scored independently and averaged.
    """
    pa, pb = to_unit(_pixels(a)), to_unit(_pixels(b))
    if pa.shape != pb.shape:
        raise ValueError(f"shape mismatch: {pa.shape} vs {pb.shape}")
    if pa.shape[0] < window_size or pa.shape[1] < window_size:
        raise ValueError(
            f"image {pa.shape[:2]} smaller than the {window_size}x{window_size} window"
        )
    window = _gaussian_window(window_size, sigma)
    c1, c2 = 0.01**2, 0.03**2

    def windowed_mean(x: np.ndarray) -> np.ndarray:
        views = np.lib.stride_tricks.sliding_window_view(
            x, (window_size, window_size)
        )
        return np.tensordot(views, window, axes=((2, 3), (0, 1)))

    values = []
    for ch in range(pa.shape[2]):
        x = pa[:, :, ch].astype(np.float64)
        y = pb[:, :, ch].astype(np.float64)
        mu_x, mu_y = windowed_mean(x), windowed_mean(y)
        var_x = windowed_mean(x * x) - mu_x**2
        var_y = windowed_mean(y * y) - mu_y**2
        cov = windowed_mean(x * y) - mu_x * mu_y
        score = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
            (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        )
        values.append(score.mean())
    return float(np.mean(values))


@dataclass(frozen=True)
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError(f"bad stats shapes: mean {mean.shape}, cov {cov.shape}")
        if not np.allclose(cov, cov.T, atol=1e-8):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-6:
            raise ValueError("covariance must be PSD within tolerance")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


def feature_stats(features: np.ndarray) -> GaussianStats:
    """Sample mean and unbiased sample covariance of row-vector features."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[0] < 2:
        raise ValueError(f"need >= 2 feature vectors, got shape {feats.shape}")
    return GaussianStats(feats.mean(axis=0), np.cov(feats, rowvar=False, ddof=1))


def _sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh((matrix + matrix.T) / 2)
    values = np.clip(values, 0.0, None)
    return (vectors * np.sqrt(values)) @ vectors.T


def fid(x_stats: GaussianStats, g_stats: GaussianStats) -> float:
    """Frechet distance between two Gaussians:
    ||mu_x - mu_g||^2 + Tr(S_x + S_g - 2 (S_x S_g)^(1/2)).

    The matrix square root is taken by eigendecomposition of the symmetrized
    product sqrt(S_x) S_g sqrt(S_x); tiny negative eigenvalues are clipped.
    """
    if x_stats.dim != g_stats.dim:
        raise ValueError(f"dimension mismatch: {x_stats.dim} vs {g_stats.dim}")
    mean_term = float(np.sum((x_stats.mean - g_stats.mean) ** 2))
    root_x = _sqrt_psd(x_stats.cov)
    inner = root_x @ g_stats.cov @ root_x
    eigvals = np.linalg.eigvalsh((inner + inner.T) / 2)
    if eigvals.min() < -1e-6:
        raise ValueError("covariance product is indefinite beyond tolerance")
    trace_sqrt = float(np.sqrt(np.clip(eigvals, 0.0, None)).sum())
    return mean_term + float(
        np.trace(x_stats.cov) + np.trace(g_stats.cov) - 2.0 * trace_sqrt
    )


def nme(pred, gt, norm: str = "inter_ocular") -> float:
    """Mean landmark error normalized by the outer-eye-corner distance."""
    if norm != "inter_ocular":
        raise ValueError(f"unknown normalization {norm!r}")
    p = pred.points if isinstance(pred, LandmarkSet) else np.asarray(pred, dtype=np.float64)
    g = gt.points if isinstance(gt, LandmarkSet) else np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape or p.shape[-1] != 2:
        raise ValueError(f"landmark shapes must match as (n, 2): {p.shape} vs {g.shape}")
    inter_ocular = float(np.linalg.norm(g[45] - g[36]))
    if inter_ocular == 0.0:
        raise ValueError("zero inter-ocular distance (eye corners coincide)")
    errors = np.linalg.norm(p.astype(np.float64) - g.astype(np.float64), axis=1)
    return float(errors.mean() / inter_ocular)


# ---------------------------------------------------------------------------
# Bucketed evaluation harness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalRow:
    bucket: str
    psnr: float
    ssim: float
    fid: float | None
    count: int


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]

    def row(self, bucket: str) -> EvalRow:
        for row in self.rows:
            if row.bucket == bucket:
                return row
        raise KeyError(bucket)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("bucket", "psnr", "ssim", "fid", "count"))
            for row in self.rows:
                writer.writerow(
                    (row.bucket, f"{row.psnr:.4f}", f"{row.ssim:.4f}",
                     "" if row.fid is None else f"{row.fid:.4f}", row.count)
                )

    def format_table(self) -> str:
        lines = [f"{'Mask':>8} | {'PSNR':>8} | {'SSIM':>7} | {'FID':>9} | {'N':>4}"]
        lines.append("-" * len(lines[0]))
        for row in self.rows:
            fid_txt = "-" if row.fid is None else f"{row.fid:9.4f}"
            lines.append(
                f"{row.bucket:>8} | {row.psnr:8.2f} | {row.ssim:7.4f} | "
                f"{fid_txt:>9} | {row.count:4d}"
            )
        return "\n".join(lines)


def default_feature_fn(image) -> np.ndarray:
    """Pooled-pixel embedding for FID when no learned backbone is supplied:
    average-pool to 8x8 per channel and flatten."""
    px = to_unit(_pixels(image)).astype(np.float64)
    h, w, _ = px.shape
    bins_h = np.array_split(np.arange(h), 8)
    bins_w = np.array_split(np.arange(w), 8)
    pooled = np.empty((8, 8, 3))
    for i, rows in enumerate(bins_h):
        for j, cols in enumerate(bins_w):
            pooled[i, j] = px[np.ix_(rows, cols)].mean(axis=(0, 1))
    return pooled.ravel()


def build_mask_suite(height: int, width: int, seed: int = 0) -> list[tuple[Mask, bool]]:
    """One mask per evaluation bucket: five random coverages plus center."""
    suite = [
        (generate_block_mask(height, width, rng_seed=seed + i, target_coverage=cov), False)
        for i, cov in enumerate((0.15, 0.25, 0.35, 0.45, 0.55))
    ]
    suite.append((generate_center_mask(height, width), True))
    return suite


def evaluate(
    generator_fn: Callable[[CorruptedImage, np.ndarray], Image],
    landmark_fn: Callable[[CorruptedImage], LandmarkSet],
    dataset: Sequence,
    mask_suite: Sequence[tuple[Mask, bool]],
    feature_fn: Callable | None = None,
) -> EvalReport:
    """Bucketed evaluation: corrupt, predict landmarks, inpaint, composite,
    then accumulate PSNR/SSIM and pooled feature stats per coverage bucket.

    `generator_fn(corrupted, landmark_map) -> Image` and
    `landmark_fn(corrupted) -> LandmarkSet` let tests substitute stubs for
    either stage. Buckets with no samples are absent from the report; FID
    needs at least two samples per bucket.
    """
    feature_fn = feature_fn or default_feature_fn
    acc: dict[str, dict] = {}
    for entry in dataset:
        image = entry.image if hasattr(entry, "image") else entry
        for mask, is_center in mask_suite:
            bucket = coverage_bucket(mask, is_center=is_center).label
            corrupted = apply_mask(image, mask)
            landmarks = landmark_fn(corrupted)
            lmap = render_landmark_map(landmarks, image.height, image.width)
            raw = generator_fn(corrupted, lmap)
            completed = composite(raw, image, mask)
            slot = acc.setdefault(
                bucket, {"psnr": [], "ssim": [], "real": [], "fake": []}
            )
            slot["psnr"].append(psnr(completed, image))
            slot["ssim"].append(ssim(completed, image))
            slot["real"].append(feature_fn(image))
            slot["fake"].append(feature_fn(completed))
    rows = []
    for bucket in COVERAGE_LABELS:
        if bucket not in acc:
            continue
        slot = acc[bucket]
        bucket_fid = None
        if len(slot["real"]) >= 2:
            bucket_fid = fid(
                feature_stats(np.stack(slot["real"])),
                feature_stats(np.stack(slot["fake"])),
            )
        rows.append(
            EvalRow(
                bucket=bucket,
                psnr=float(np.mean(slot["psnr"])),
                ssim=float(np.mean(slot["ssim"])),
                fid=bucket_fid,
                count=len(slot["psnr"]),
            )
        )
    return EvalReport(tuple(rows))
