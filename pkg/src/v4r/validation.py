"""Input validation helpers for the array types used throughout the package.

Frames are ``uint8`` arrays of shape ``(H, W, 3)``, gray frames ``(H, W)``,
and masks / segmentation maps binary ``uint8`` arrays of shape ``(H, W)``.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch

__all__ = ["check_rgb", "check_gray", "check_binary", "check_same_shape"]


def check_rgb(frame) -> np.ndarray:
    """Validate an RGB frame and return it as a ``(H, W, 3)`` uint8 array."""
    arr = np.asarray(frame)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) RGB frame, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"frame dimensions must be >= 1, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 frame, got dtype {arr.dtype}")
    return arr


def check_gray(frame) -> np.ndarray:
    """Validate a gray frame and return it as a ``(H, W)`` uint8 array."""
    arr = np.asarray(frame)
    if arr.ndim != 2:
        raise ValueError(f"expected (H, W) gray frame, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"frame dimensions must be >= 1, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 gray frame, got dtype {arr.dtype}")
    return arr


def check_binary(mask) -> np.ndarray:
    """Validate a binary mask / segmentation map, returning uint8 with values in {0, 1}."""
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"expected (H, W) binary raster, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
        else:
            raise ValueError(f"expected uint8 or bool mask, got dtype {arr.dtype}")
    if arr.size and int(arr.max(initial=0)) > 1:
        raise ValueError("mask values must be in {0, 1}")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "inputs") -> None:
    """Raise :class:`DimensionMismatch` unless the two arrays share height/width."""
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatch(f"{what} differ in dimensions: {a.shape[:2]} vs {b.shape[:2]}")
