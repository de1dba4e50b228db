"""Binary mask production, morphology, augmentation and RLE serialization.

All morphology uses a square (Chebyshev) structuring element; pixels outside
the canvas count as 0.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import EmptyMask, InvalidParams, InvalidRle
from .validation import check_binary, check_same_shape

__all__ = [
    "CleanupConfig",
    "AugConfig",
    "AugmentedMask",
    "RleMask",
    "mog_mask_cleanup",
    "dilate",
    "erode",
    "tight_box",
    "augment_mask",
    "derive_record_seed",
    "rle_encode",
    "rle_decode",
    "mask_iou",
]

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)

AUG_KINDS = ("none", "dilate", "erode", "box")


def _square(radius: int) -> np.ndarray:
    return np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)


@dataclass(frozen=True)
class CleanupConfig:
    """Post-processing applied to raw segmentation maps before use as masks."""

    open_radius: int = 1
    min_component_px: int = 64
    keep: str = "largest"  # "largest" | "all_above_min"
    fill_holes: bool = True

    def validate(self) -> "CleanupConfig":
        if self.open_radius < 0:
            raise InvalidParams("open_radius must be >= 0")
        if self.min_component_px < 0:
            raise InvalidParams("min_component_px must be >= 0")
        if self.keep not in ("largest", "all_above_min"):
            raise InvalidParams(f"keep must be 'largest' or 'all_above_min', got {self.keep!r}")
        return self


@dataclass(frozen=True)
class AugConfig:
    """Randomized mask augmentation settings."""

    enabled: bool = False
    radius_min: int = 1
    radius_max: int = 9

    def validate(self) -> "AugConfig":
        if self.radius_min < 1:
            raise InvalidParams("radius_min must be >= 1")
        if self.radius_max < self.radius_min:
            raise InvalidParams("radius_max must be >= radius_min")
        return self


@dataclass(frozen=True)
class AugmentedMask:
    mask: np.ndarray
    kind: str  # one of AUG_KINDS
    radius: int | None  # present iff kind is dilate/erode


@dataclass(frozen=True)
class RleMask:
    """Run-length encoding over row-major order, starting with a zero-run."""

    width: int
    height: int
    runs: tuple[int, ...]

    def to_json_dict(self) -> dict:
        return {"w": self.width, "h": self.height, "runs": list(self.runs)}

    @classmethod
    def from_json_dict(cls, data: dict) -> "RleMask":
        try:
            w, h, runs = int(data["w"]), int(data["h"]), [int(r) for r in data["runs"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidRle(f"malformed RLE object: {exc}") from exc
        return cls(width=w, height=h, runs=tuple(runs))


def mog_mask_cleanup(seg_map: np.ndarray, cfg: CleanupConfig = CleanupConfig()) -> np.ndarray:
    """Turn a raw segmentation map into a clean object mask.

    Morphological opening, 8-connected component filtering (largest component
    or every component above ``min_component_px``), then hole filling.
    Raises :class:`EmptyMask` if no component survives.
    """
    cfg.validate()
    m = check_binary(seg_map).astype(bool)
    if cfg.open_radius > 0:
        se = _square(cfg.open_radius)
        m = ndimage.binary_erosion(m, structure=se)
        m = ndimage.binary_dilation(m, structure=se)
    labels, count = ndimage.label(m, structure=_EIGHT_CONNECTED)
    if count == 0:
        raise EmptyMask("no foreground component after opening")
    sizes = np.bincount(labels.ravel())
    sizes[0] = 0
    if cfg.keep == "largest":
        best = int(np.argmax(sizes))
        if sizes[best] < cfg.min_component_px:
            raise EmptyMask(
                f"largest component ({sizes[best]} px) below min_component_px={cfg.min_component_px}"
            )
        out = labels == best
    else:
        wanted = np.flatnonzero(sizes >= max(cfg.min_component_px, 1))
        if wanted.size == 0:
            raise EmptyMask(f"no component reaches min_component_px={cfg.min_component_px}")
        out = np.isin(labels, wanted)
    if cfg.fill_holes:
        out = ndimage.binary_fill_holes(out)
    return out.astype(np.uint8)


def dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    """Set a pixel iff any input pixel lies within Chebyshev distance <= radius."""
    if radius < 1:
        raise InvalidParams("dilation radius must be >= 1")
    m = check_binary(mask)
    return ndimage.binary_dilation(m.astype(bool), structure=_square(radius)).astype(np.uint8)


def erode(mask: np.ndarray, radius: int) -> np.ndarray:
    """Set a pixel iff every pixel within Chebyshev distance <= radius is set.

    Out-of-canvas neighbors count as 0, so the border is always eroded.
    """
    if radius < 1:
        raise InvalidParams("erosion radius must be >= 1")
    m = check_binary(mask)
    return ndimage.binary_erosion(
        m.astype(bool), structure=_square(radius), border_value=0
    ).astype(np.uint8)


def tight_box(mask: np.ndarray) -> np.ndarray:
    """Smallest axis-aligned solid rectangle enclosing all foreground pixels."""
    m = check_binary(mask)
    rows = np.flatnonzero(m.any(axis=1))
    if rows.size == 0:
        raise EmptyMask("cannot box an empty mask")
    cols = np.flatnonzero(m.any(axis=0))
    out = np.zeros_like(m)
    out[rows[0] : rows[-1] + 1, cols[0] : cols[-1] + 1] = 1
    return out


def augment_mask(mask: np.ndarray, seed: int, cfg: AugConfig = AugConfig()) -> AugmentedMask:
    """Randomly leave the mask unchanged, dilate, erode, or replace it by its box.

    The four outcomes are drawn uniformly from a generator seeded by ``seed``,
    so a given (mask, seed, cfg) always produces the same output. An erosion
    that would empty the mask falls back to the unchanged mask, reported as
    kind "none".
    """
    cfg.validate()
    m = check_binary(mask)
    if int(m.sum()) == 0:
        raise EmptyMask("cannot augment an empty mask")
    rng = np.random.default_rng(seed)
    kind = AUG_KINDS[int(rng.integers(0, 4))]
    if kind == "none":
        return AugmentedMask(mask=m, kind="none", radius=None)
    if kind == "box":
        return AugmentedMask(mask=tight_box(m), kind="box", radius=None)
    radius = int(rng.integers(cfg.radius_min, cfg.radius_max + 1))
    if kind == "dilate":
        return AugmentedMask(mask=dilate(m, radius), kind="dilate", radius=radius)
    eroded = erode(m, radius)
    if int(eroded.sum()) == 0:
        return AugmentedMask(mask=m, kind="none", radius=None)
    return AugmentedMask(mask=eroded, kind="erode", radius=radius)


def derive_record_seed(global_seed: int, record_id: str) -> int:
    """Stable 64-bit per-record seed; independent of processing order."""
    digest = hashlib.sha256(json.dumps([int(global_seed), record_id]).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rle_encode(mask: np.ndarray) -> RleMask:
    """Encode a mask as alternating run lengths starting with a zero-run."""
    m = check_binary(mask)
    flat = m.ravel()
    boundaries = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    edges = np.concatenate(([0], boundaries, [flat.size]))
    runs = np.diff(edges).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return RleMask(width=m.shape[1], height=m.shape[0], runs=tuple(int(r) for r in runs))


def rle_decode(rle: RleMask) -> np.ndarray:
    """Inverse of :func:`rle_encode`; validates run totals and alternation."""
    area = rle.width * rle.height
    if rle.width < 1 or rle.height < 1:
        raise InvalidRle(f"dimensions must be >= 1, got {rle.width}x{rle.height}")
    runs = list(rle.runs)
    if not runs:
        raise InvalidRle("empty runs list")
    if any(r < 0 for r in runs):
        raise InvalidRle("negative run length")
    if any(r == 0 for r in runs[1:]):
        raise InvalidRle("zero-length run after the first")
    if sum(runs) != area:
        raise InvalidRle(f"run total {sum(runs)} != area {area}")
    values = np.arange(len(runs), dtype=np.uint8) % 2
    flat = np.repeat(values, runs)
    return flat.reshape(rle.height, rle.width)


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection-over-union of two masks; 1.0 when both are empty."""
    ma = check_binary(a)
    mb = check_binary(b)
    check_same_shape(ma, mb, "masks")
    inter = int(np.logical_and(ma, mb).sum())
    union = int(np.logical_or(ma, mb).sum())
    if union == 0:
        return 1.0
    return inter / union
