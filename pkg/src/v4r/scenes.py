"""Per-scene orchestration: frame separation, pairing and quality gates.

A scene is a directory of temporally ordered frames captured from a fixed
viewpoint: ``<scenes_dir>/<scene_id>/frame_000123.png`` (lexicographic order
equals temporal order). An optional ``scene.json`` can set ``fps_hint`` and a
``prompt`` string forwarded to the segmentation sidecar.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imaging
from .background import BackgroundSubtractor, MogParams, foreground_ratio, is_foreground_frame
from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyCandidates,
    InvalidParams,
    MaskTooSmall,
    TooFewFrames,
)
from .validation import check_binary, check_gray, check_same_shape

__all__ = [
    "SceneSequence",
    "SeparationResult",
    "PairedCandidate",
    "QualityScores",
    "GateConfig",
    "discover_scenes",
    "load_scene",
    "separate_frames",
    "pair_frames",
    "blur_score",
    "quality_gate",
    "PAIRING_MODES",
]

PAIRING_MODES = ("min_mse", "temporal_closest")

_FRAME_NAME = re.compile(r"^frame_(\d+)\.(png|jpg|jpeg)$", re.IGNORECASE)
_MSE_TIE = 1e-9


@dataclass(frozen=True)
class SceneSequence:
    scene_id: str
    frames: tuple[tuple[int, Path], ...]  # (temporal index, file path), strictly increasing
    fps_hint: float | None = None
    prompt: str | None = None

    def validate(self) -> "SceneSequence":
        if len(self.frames) < 2:
            raise TooFewFrames(f"scene {self.scene_id!r} has {len(self.frames)} frame(s), need >= 2")
        indices = [i for i, _ in self.frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise InvalidParams(f"scene {self.scene_id!r} frame indices are not strictly increasing")
        return self


@dataclass(frozen=True)
class ForegroundFrame:
    index: int
    fg_ratio: float
    seg_map: np.ndarray


@dataclass(frozen=True)
class BackgroundFrame:
    index: int
    fg_ratio: float


@dataclass(frozen=True)
class SeparationResult:
    foreground: tuple[ForegroundFrame, ...]
    background: tuple[BackgroundFrame, ...]
    warmup_indices: tuple[int, ...] = field(default=())


@dataclass(frozen=True)
class PairedCandidate:
    fg_index: int
    bg_index: int
    pair_mse: float
    temporal_gap: int


@dataclass(frozen=True)
class QualityScores:
    blur_score: float
    mask_area_px: int
    frame_area_px: int


@dataclass(frozen=True)
class GateConfig:
    min_blur: float = 100.0
    min_area_px: int = 256
    max_fg_ratio: float = 0.6

    def validate(self) -> "GateConfig":
        if self.min_blur < 0:
            raise InvalidParams("min_blur must be >= 0")
        if self.min_area_px < 0:
            raise InvalidParams("min_area_px must be >= 0")
        if not 0.0 < self.max_fg_ratio <= 1.0:
            raise InvalidParams("max_fg_ratio must be in (0, 1]")
        return self


def load_scene(scene_dir) -> SceneSequence:
    """Build a :class:`SceneSequence` from one scene directory."""
    scene_dir = Path(scene_dir)
    frames = []
    for pos, path in enumerate(imaging._frame_dir_listing(scene_dir)):
        match = _FRAME_NAME.match(path.name)
        frames.append((int(match.group(1)) if match else pos, path))
    fps_hint = None
    prompt = None
    meta_path = scene_dir / "scene.json"
    if meta_path.is_file():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        unknown = set(meta) - {"fps_hint", "prompt"}
        if unknown:
            raise ConfigError(f"{meta_path}: unknown keys {sorted(unknown)}")
        fps_hint = meta.get("fps_hint")
        prompt = meta.get("prompt")
    return SceneSequence(
        scene_id=scene_dir.name, frames=tuple(frames), fps_hint=fps_hint, prompt=prompt
    ).validate()


def discover_scenes(scenes_dir) -> list[SceneSequence]:
    """All scene subdirectories of ``scenes_dir`` that contain frames, sorted by id."""
    scenes_dir = Path(scenes_dir)
    if not scenes_dir.is_dir():
        raise FileNotFoundError(f"no such directory: {scenes_dir}")
    scenes = []
    for sub in sorted(p for p in scenes_dir.iterdir() if p.is_dir()):
        if imaging._frame_dir_listing(sub):
            scenes.append(load_scene(sub))
    return scenes


def separate_frames(scene: SceneSequence, params: MogParams, delta: float) -> SeparationResult:
    """Run the background model over a scene and classify every non-warmup frame.

    Frames pass through one model in temporal order; the first
    ``params.warmup_frames`` frames only train the model. Segmentation maps
    are retained for foreground frames only.
    """
    scene.validate()
    params.validate()
    if len(scene.frames) < params.warmup_frames + 2:
        raise TooFewFrames(
            f"scene {scene.scene_id!r} has {len(scene.frames)} frames; "
            f"needs at least warmup_frames + 2 = {params.warmup_frames + 2}"
        )
    model = BackgroundSubtractor.from_params(params)
    fg: list[ForegroundFrame] = []
    bg: list[BackgroundFrame] = []
    warmup: list[int] = []
    for pos, (index, path) in enumerate(scene.frames):
        gray = imaging.to_gray(imaging.load_image(path))
        seg = model.apply(gray)
        if pos < params.warmup_frames:
            warmup.append(index)
            continue
        ratio = foreground_ratio(seg)
        if is_foreground_frame(ratio, delta):
            fg.append(ForegroundFrame(index=index, fg_ratio=ratio, seg_map=seg))
        else:
            bg.append(BackgroundFrame(index=index, fg_ratio=ratio))
    return SeparationResult(
        foreground=tuple(fg), background=tuple(bg), warmup_indices=tuple(warmup)
    )


def pair_frames(
    fg_frame: np.ndarray,
    fg_index: int,
    backgrounds: list[tuple[int, np.ndarray]],
    mode: str = "min_mse",
    window: int | None = None,
) -> PairedCandidate:
    """Pick the ground-truth background frame for one foreground frame.

    ``min_mse`` minimizes pixel MSE; exact ties (within 1e-9) break toward
    the smaller temporal gap, then the smaller index. ``temporal_closest``
    minimizes the temporal gap directly, ties toward the smaller index.
    ``window`` restricts candidates to |index - fg_index| <= window.
    """
    if mode not in PAIRING_MODES:
        raise InvalidParams(f"unknown pairing mode {mode!r}")
    candidates = list(backgrounds)
    if window is not None:
        candidates = [(i, f) for i, f in candidates if abs(i - fg_index) <= window]
    if not candidates:
        raise EmptyCandidates(f"no background candidates for foreground frame {fg_index}")

    if mode == "temporal_closest":
        best_i, _ = min(candidates, key=lambda c: (abs(c[0] - fg_index), c[0]))
        best_mse = imaging.frame_mse(fg_frame, dict(candidates)[best_i])
        return PairedCandidate(
            fg_index=fg_index,
            bg_index=best_i,
            pair_mse=best_mse,
            temporal_gap=abs(best_i - fg_index),
        )

    scored = [(imaging.frame_mse(fg_frame, f), i) for i, f in candidates]
    floor = min(m for m, _ in scored)
    tied = [(i, m) for m, i in scored if m - floor < _MSE_TIE]
    best_i, best_mse = min(tied, key=lambda t: (abs(t[0] - fg_index), t[0]))
    return PairedCandidate(
        fg_index=fg_index,
        bg_index=best_i,
        pair_mse=best_mse,
        temporal_gap=abs(best_i - fg_index),
    )


def blur_score(gray: np.ndarray, mask: np.ndarray) -> float:
    """Focus measure: variance of the 4-neighbor Laplacian over masked pixels.

    Kernel is center -4 with N/S/E/W +1, zero-padded at borders. Requires at
    least 9 foreground pixels in the mask.
    """
    g = check_gray(gray)
    m = check_binary(mask)
    check_same_shape(g, m, "gray frame and mask")
    if int(m.sum()) < 9:
        raise MaskTooSmall("blur score needs a mask with >= 9 foreground pixels")
    f = g.astype(np.float64)
    padded = np.pad(f, 1)
    lap = (
        -4.0 * f
        + padded[:-2, 1:-1]
        + padded[2:, 1:-1]
        + padded[1:-1, :-2]
        + padded[1:-1, 2:]
    )
    return float(np.var(lap[m == 1]))


def quality_gate(scores: QualityScores, cfg: GateConfig = GateConfig()) -> str | None:
    """Return ``None`` to accept, or a rejection reason string.

    Reasons: ``blurred`` (blur score below min), ``tiny_mask`` (area below
    min), ``oversized`` (mask covers more than max_fg_ratio of the frame).
    """
    cfg.validate()
    if scores.blur_score < cfg.min_blur:
        return "blurred"
    if scores.mask_area_px < cfg.min_area_px:
        return "tiny_mask"
    if scores.mask_area_px / scores.frame_area_px > cfg.max_fg_ratio:
        return "oversized"
    return None
