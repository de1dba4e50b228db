"""Neural-free image embeddings and the on-disk embedding format.

The built-in embedder downsamples luma onto a 16x16 grid with bilinear
sampling, centers the 256 values and L2-normalizes them. It exists so the
whole metric suite runs with no model weights; a sidecar can substitute real
CLIP/DINO/Inception features through the same interface.

Offline embeddings use a small binary format: magic ``EMB1``, little-endian
u32 count and u32 dim, count*dim little-endian float32 values row-major,
followed by one newline-terminated UTF-8 source path per row.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import imaging
from .errors import DecodeError, InvalidParams
from .validation import check_rgb

__all__ = ["EmbeddingSet", "GridEmbedder", "embed_frame", "write_embeddings", "read_embeddings"]

GRID = 16
EMBED_DIM = GRID * GRID

_MAGIC = b"EMB1"


@dataclass
class EmbeddingSet:
    """A row-per-image embedding matrix with the source path of each row."""

    data: np.ndarray  # (n, d) float64
    paths: tuple[str, ...]

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise InvalidParams(f"embedding matrix must be (n>=1, d>=1), got {self.data.shape}")
        if len(self.paths) != self.data.shape[0]:
            raise InvalidParams("one source path required per embedding row")
        if not np.isfinite(self.data).all():
            raise InvalidParams("embeddings contain NaN or Inf")

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def _axis_samples(length: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Source indices and fractional weights for 16 bilinear taps along an axis."""
    targets = (np.arange(GRID) + 0.5) * (length / GRID) - 0.5
    targets = np.clip(targets, 0.0, length - 1.0)
    lo = np.floor(targets).astype(np.int64)
    frac = targets - lo
    hi = np.minimum(lo + 1, length - 1)
    return lo, hi, frac


def embed_frame(frame: np.ndarray) -> np.ndarray:
    """Embed one RGB frame into a centered, unit-norm 256-vector.

    All-constant frames map exactly to the zero vector: bilinear blending is
    computed as ``a + t*(b - a)`` so constants survive exactly, and centering
    then cancels them.
    """
    g = imaging.to_gray(check_rgb(frame)).astype(np.float64)
    h, w = g.shape
    ylo, yhi, yfrac = _axis_samples(h)
    xlo, xhi, xfrac = _axis_samples(w)
    rows = g[ylo, :] + yfrac[:, None] * (g[yhi, :] - g[ylo, :])
    grid = rows[:, xlo] + xfrac[None, :] * (rows[:, xhi] - rows[:, xlo])
    v = grid.ravel()
    v = v - np.mean(v)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        return np.zeros(EMBED_DIM)
    return v / norm


class GridEmbedder(BaseEstimator, TransformerMixin):
    """Sklearn-style transformer wrapping :func:`embed_frame`.

    ``transform`` maps an iterable of RGB frames to an (n, 256) matrix;
    ``embed_images`` does the same from file paths (the interface the metric
    suite uses, shared with the sidecar-backed embedder).
    """

    model_id = "builtin-grid16"

    def fit(self, X=None, y=None):
        return self

    def transform(self, frames) -> np.ndarray:
        return np.stack([embed_frame(f) for f in frames])

    def embed_images(self, paths) -> EmbeddingSet:
        paths = [str(p) for p in paths]
        data = np.stack([embed_frame(imaging.load_image(p)) for p in paths])
        return EmbeddingSet(data=data, paths=tuple(paths))


def write_embeddings(path, embeddings: EmbeddingSet) -> None:
    """Serialize an :class:`EmbeddingSet` in the EMB1 binary format."""
    path = Path(path)
    n, d = embeddings.count, embeddings.dim
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(embeddings.data.astype("<f4").tobytes(order="C"))
        for p in embeddings.paths:
            fh.write(p.encode("utf-8") + b"\n")


def read_embeddings(path) -> EmbeddingSet:
    """Parse an EMB1 file back into an :class:`EmbeddingSet`."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != _MAGIC:
        raise DecodeError(f"{path}: bad magic, not an EMB1 file")
    if len(blob) < 12:
        raise DecodeError(f"{path}: truncated header")
    n, d = struct.unpack("<II", blob[4:12])
    body_end = 12 + 4 * n * d
    if len(blob) < body_end:
        raise DecodeError(f"{path}: truncated data section")
    data = np.frombuffer(blob[12:body_end], dtype="<f4").reshape(n, d).astype(np.float64)
    tail = blob[body_end:].decode("utf-8")
    paths = tail.splitlines()
    if len(paths) != n:
        raise DecodeError(f"{path}: expected {n} source paths, found {len(paths)}")
    return EmbeddingSet(data=data, paths=tuple(paths))
