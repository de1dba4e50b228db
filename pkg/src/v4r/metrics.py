"""Evaluation metrics: PSNR, Fréchet distance, kernel MMD and paired cosine
distance over embedding sets, plus the directory-level evaluation harness.

The Fréchet distance here is computed in whatever embedding space the caller
supplies; it equals FID when the embeddings come from an Inception network
(via the sidecar), and runs on the built-in embedder otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imaging
from .embeddings import EmbeddingSet, GridEmbedder
from .errors import (
    AlignmentError,
    CountMismatch,
    DimensionMismatch,
    EmptyMask,
    InvalidParams,
    NumericalFailure,
    TooFewSamples,
)
from .validation import check_rgb, check_same_shape

__all__ = [
    "GaussianStats",
    "MetricReport",
    "psnr",
    "mean_cov",
    "frechet_distance",
    "mmd2",
    "paired_embedding_distance",
    "evaluate",
]

DEFAULT_BANDWIDTH = 10.0
DEFAULT_MMD_SCALE = 1000.0

_NEGATIVE_TOL = 1e-6


@dataclass(frozen=True)
class GaussianStats:
    """Mean vector and (symmetric PSD) covariance of an embedding set."""

    mean: np.ndarray
    cov: np.ndarray


@dataclass
class MetricReport:
    """Metric name -> value mapping plus provenance of how it was computed."""

    values: dict[str, float]
    provenance: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out: dict = {}
        for name, value in self.values.items():
            out[name] = "inf" if math.isinf(value) else value
        out["provenance"] = self.provenance
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"


def psnr(a: np.ndarray, b: np.ndarray, max_value: float = 255.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    mse = imaging.frame_mse(a, b)
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse)


def mean_cov(embeddings: EmbeddingSet | np.ndarray) -> GaussianStats:
    """Column mean and unbiased sample covariance, symmetrized."""
    data = embeddings.data if isinstance(embeddings, EmbeddingSet) else np.asarray(embeddings, float)
    if data.ndim != 2:
        raise InvalidParams(f"expected (n, d) matrix, got shape {data.shape}")
    n = data.shape[0]
    if n < 2:
        raise TooFewSamples(f"covariance needs n >= 2 samples, got {n}")
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / (n - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean=mean, cov=cov)


def _sqrtm_psd(sym: np.ndarray) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix via eigendecomposition."""
    try:
        eigvals, eigvecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def frechet_distance(a: GaussianStats, b: GaussianStats, eps: float = 1e-6) -> float:
    """Fréchet distance between two Gaussians:

        ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2)

    Matrix square roots use symmetric eigendecomposition with eigenvalues
    clamped to >= 0. If either covariance is near-singular (smallest
    eigenvalue < eps) both get eps*I added. Tiny negative totals (within
    -1e-6, pure roundoff) clamp to zero.
    """
    if a.mean.shape != b.mean.shape or a.cov.shape != b.cov.shape:
        raise DimensionMismatch(
            f"stat dimensions differ: {a.mean.shape}/{a.cov.shape} vs {b.mean.shape}/{b.cov.shape}"
        )
    cov_a, cov_b = a.cov, b.cov
    try:
        smallest = min(np.linalg.eigvalsh(cov_a)[0], np.linalg.eigvalsh(cov_b)[0])
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    if smallest < eps:
        bump = eps * np.eye(cov_a.shape[0])
        cov_a = cov_a + bump
        cov_b = cov_b + bump
    root_a = _sqrtm_psd(cov_a)
    inner = root_a @ cov_b @ root_a
    inner = (inner + inner.T) / 2.0
    cross = _sqrtm_psd(inner)
    delta = a.mean - b.mean
    value = float(delta @ delta + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(cross))
    if value < 0.0:
        if value < -_NEGATIVE_TOL:
            raise NumericalFailure(f"Fréchet distance came out negative: {value}")
        value = 0.0
    return value


def _gaussian_kernel(x: np.ndarray, y: np.ndarray, bandwidth: float) -> np.ndarray:
    sq = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(y * y, axis=1)[None, :]
        - 2.0 * (x @ y.T)
    )
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-sq / (2.0 * bandwidth * bandwidth))


def mmd2(
    x: EmbeddingSet | np.ndarray,
    y: EmbeddingSet | np.ndarray,
    bandwidth: float = DEFAULT_BANDWIDTH,
    scale: float = DEFAULT_MMD_SCALE,
) -> float:
    """Scaled unbiased squared maximum mean discrepancy with an RBF kernel.

    k(u, v) = exp(-||u - v||^2 / (2 bandwidth^2)); diagonal terms are
    excluded from the within-set sums (unbiased estimator), so the value can
    be slightly negative for close distributions.
    """
    xd = x.data if isinstance(x, EmbeddingSet) else np.asarray(x, float)
    yd = y.data if isinstance(y, EmbeddingSet) else np.asarray(y, float)
    if bandwidth <= 0:
        raise InvalidParams("bandwidth must be > 0")
    if xd.ndim != 2 or yd.ndim != 2:
        raise InvalidParams("expected (n, d) matrices")
    if xd.shape[1] != yd.shape[1]:
        raise DimensionMismatch(f"embedding dims differ: {xd.shape[1]} vs {yd.shape[1]}")
    m, n = xd.shape[0], yd.shape[0]
    if m < 2 or n < 2:
        raise TooFewSamples("unbiased MMD needs >= 2 samples on each side")
    kxx = _gaussian_kernel(xd, xd, bandwidth)
    kyy = _gaussian_kernel(yd, yd, bandwidth)
    kxy = _gaussian_kernel(xd, yd, bandwidth)
    sum_xx = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    sum_yy = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    sum_xy = kxy.sum() * 2.0 / (m * n)
    return float(scale * (sum_xx + sum_yy - sum_xy))


def paired_embedding_distance(x: EmbeddingSet | np.ndarray, y: EmbeddingSet | np.ndarray) -> float:
    """Mean (1 - cosine similarity) over index-aligned embedding pairs.

    A zero vector on either side of a pair contributes cosine 0.
    """
    xd = x.data if isinstance(x, EmbeddingSet) else np.asarray(x, float)
    yd = y.data if isinstance(y, EmbeddingSet) else np.asarray(y, float)
    if xd.shape[0] != yd.shape[0]:
        raise CountMismatch(f"paired sets differ in size: {xd.shape[0]} vs {yd.shape[0]}")
    if xd.shape[1] != yd.shape[1]:
        raise DimensionMismatch(f"embedding dims differ: {xd.shape[1]} vs {yd.shape[1]}")
    nx = np.linalg.norm(xd, axis=1)
    ny = np.linalg.norm(yd, axis=1)
    dots = np.sum(xd * yd, axis=1)
    denom = nx * ny
    cos = np.where(denom > 0.0, dots / np.where(denom > 0.0, denom, 1.0), 0.0)
    return float(np.mean(1.0 - cos))


def _aligned_names(pred_dir: Path, gt_dir: Path) -> list[str]:
    pred_names = [p.name for p in imaging._frame_dir_listing(pred_dir)]
    gt_names = {p.name for p in imaging._frame_dir_listing(gt_dir)}
    if not pred_names:
        raise AlignmentError(f"no images found in {pred_dir}")
    missing_gt = [n for n in pred_names if n not in gt_names]
    if missing_gt:
        raise AlignmentError(f"ground truth missing for {missing_gt[0]!r}")
    extra_gt = sorted(gt_names - set(pred_names))
    if extra_gt:
        raise AlignmentError(f"prediction missing for {extra_gt[0]!r}")
    return pred_names


def _mask_for(name: str, mask_dir: Path) -> Path:
    stem = Path(name).stem
    for ext in (".png", ".jpg", ".jpeg"):
        cand = mask_dir / (stem + ext)
        if cand.is_file():
            return cand
    raise AlignmentError(f"mask missing for {name!r}")


def _bbox_psnr(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray, max_value: float) -> float:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise EmptyMask("mask has no foreground; masked-region PSNR undefined")
    sl = (slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1))
    return psnr(pred[sl], gt[sl], max_value=max_value)


def evaluate(
    pred_dir,
    gt_dir,
    mask_dir=None,
    embedder=None,
    bandwidth: float = DEFAULT_BANDWIDTH,
    mmd_scale: float = DEFAULT_MMD_SCALE,
    extra_metrics: dict[str, float] | None = None,
) -> MetricReport:
    """Evaluate a directory of predictions against aligned ground truth.

    Computes mean PSNR over pairs, Fréchet distance and MMD between the two
    embedding distributions, and the paired embedding distance. With
    ``mask_dir``, PSNR is additionally reported over each mask's bounding box
    (masked-region preservation). ``extra_metrics`` (e.g. sidecar-provided
    LPIPS) are merged into the report verbatim.
    """
    pred_dir, gt_dir = Path(pred_dir), Path(gt_dir)
    names = _aligned_names(pred_dir, gt_dir)
    embedder = embedder if embedder is not None else GridEmbedder()

    psnrs = []
    masked_psnrs = []
    for name in names:
        pred = check_rgb(imaging.load_image(pred_dir / name))
        gt = check_rgb(imaging.load_image(gt_dir / name))
        check_same_shape(pred, gt, f"prediction and ground truth for {name!r}")
        psnrs.append(psnr(pred, gt))
        if mask_dir is not None:
            mask = imaging.load_mask(_mask_for(name, Path(mask_dir)))
            check_same_shape(pred, mask, f"prediction and mask for {name!r}")
            masked_psnrs.append(_bbox_psnr(pred, gt, mask, 255.0))

    pred_emb = embedder.embed_images([pred_dir / n for n in names])
    gt_emb = embedder.embed_images([gt_dir / n for n in names])

    values = {
        "psnr": float(np.mean(psnrs)),
        "fid": frechet_distance(mean_cov(pred_emb), mean_cov(gt_emb)),
        "cmmd": mmd2(pred_emb, gt_emb, bandwidth=bandwidth, scale=mmd_scale),
        "dino": paired_embedding_distance(pred_emb, gt_emb),
    }
    if masked_psnrs:
        values["psnr_masked_bbox"] = float(np.mean(masked_psnrs))
    if extra_metrics:
        values.update(extra_metrics)
    provenance = {
        "embedder": getattr(embedder, "model_id", embedder.__class__.__name__),
        "embedding_dim": pred_emb.dim,
        "mmd_bandwidth": bandwidth,
        "mmd_scale": mmd_scale,
        "pair_count": len(names),
    }
    return MetricReport(values=values, provenance=provenance)
