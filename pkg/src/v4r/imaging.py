"""Image decoding/encoding, color conversion and pixelwise arithmetic.

Frames are immutable by convention: no function in this package mutates an
input array, so frames are safe to share across threads.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError
from .validation import check_binary, check_gray, check_rgb, check_same_shape

__all__ = [
    "load_image",
    "save_image",
    "load_mask",
    "save_mask",
    "to_gray",
    "frame_mse",
]

# ITU-R BT.601 luma weights.
_LUMA_R, _LUMA_G, _LUMA_B = 0.299, 0.587, 0.114


def load_image(path) -> np.ndarray:
    """Decode a PNG or JPEG file into an RGB ``(H, W, 3)`` uint8 frame.

    Grayscale sources are expanded to three identical channels; alpha
    channels are dropped. Raises ``OSError`` for missing/unreadable files
    and :class:`DecodeError` for corrupt or unsupported content.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise DecodeError(f"unrecognized image format: {path}") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"failed to decode {path}: {exc}") from exc
    return check_rgb(arr)


def save_image(frame: np.ndarray, path) -> None:
    """Write a frame as PNG (lossless; loading it back reproduces the pixels)."""
    arr = check_rgb(frame)
    path = Path(path)
    if not path.parent.is_dir():
        raise FileNotFoundError(f"parent directory does not exist: {path.parent}")
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def load_mask(path) -> np.ndarray:
    """Load a binary mask stored as an 8-bit PNG (0/255) into a {0, 1} array."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such mask file: {path}")
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"), dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise DecodeError(f"unrecognized image format: {path}") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"failed to decode {path}: {exc}") from exc
    return (arr > 127).astype(np.uint8)


def save_mask(mask: np.ndarray, path) -> None:
    """Write a {0, 1} mask or segmentation map as an 8-bit PNG (0 -> 0, 1 -> 255)."""
    arr = check_binary(mask)
    path = Path(path)
    if not path.parent.is_dir():
        raise FileNotFoundError(f"parent directory does not exist: {path.parent}")
    Image.fromarray(arr * np.uint8(255), mode="L").save(path, format="PNG")


def to_gray(frame: np.ndarray) -> np.ndarray:
    """Convert RGB to 8-bit luma: round(0.299 R + 0.587 G + 0.114 B), half up."""
    arr = check_rgb(frame).astype(np.float64)
    luma = _LUMA_R * arr[..., 0] + _LUMA_G * arr[..., 1] + _LUMA_B * arr[..., 2]
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def frame_mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared error over all channel values, in squared 8-bit levels."""
    fa = check_rgb(a)
    fb = check_rgb(b)
    check_same_shape(fa, fb, "frames")
    diff = fa.astype(np.float64) - fb.astype(np.float64)
    return float(np.mean(diff * diff))


def _frame_dir_listing(directory) -> list[Path]:
    """Sorted image files (png/jpg/jpeg) directly inside ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"no such directory: {directory}")
    out = [
        directory / name
        for name in sorted(os.listdir(directory))
        if name.lower().endswith((".png", ".jpg", ".jpeg"))
    ]
    return out
