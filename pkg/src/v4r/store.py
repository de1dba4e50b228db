"""Triplet emission, JSONL manifests, dataset statistics and validation.

On-disk layout, rooted at the output directory:

    <out>/<scene_id>/<record_id>/input.png   # frame with the object (x)
    <out>/<scene_id>/<record_id>/gt.png      # paired background frame
    <out>/<scene_id>/<record_id>/mask.png    # object mask, 0/255
    <out>/manifest.jsonl                     # header line + one record per line

Manifests carry no timestamps and use canonical JSON so identical runs are
byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import imaging
from .errors import DimensionMismatch, DuplicateRecord, ManifestParseError
from .validation import check_binary, check_rgb, check_same_shape

__all__ = [
    "TripletRecord",
    "GuidancePair",
    "StatsReport",
    "DatasetWriter",
    "make_record_id",
    "decompose_object_background",
    "write_manifest",
    "read_manifest",
    "dataset_stats",
    "validate_dataset",
]

MANIFEST_NAME = "manifest.jsonl"
_HIST_BINS = 20


@dataclass(frozen=True)
class TripletRecord:
    """One emitted (input, mask, ground truth) sample plus its provenance."""

    record_id: str
    scene_id: str
    input_frame: str  # paths relative to the dataset root
    gt_frame: str
    mask: str
    fg_ratio: float
    pair_mse: float
    temporal_gap: int
    blur_score: float
    mask_area_px: int
    augmentation: str  # none | dilate | erode | box
    aug_radius: int | None
    pairing_mode: str
    source_fg_index: int
    source_bg_index: int

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, data: dict) -> "TripletRecord":
        return cls(**data)


@dataclass(frozen=True)
class GuidancePair:
    """Pixel-level object/background decomposition of a frame under a mask."""

    object_image: np.ndarray
    background_image: np.ndarray
    mask: np.ndarray


def make_record_id(scene_id: str, fg_index: int, bg_index: int) -> str:
    """Stable 16-hex-char id for a (scene, foreground, background) triple."""
    payload = json.dumps([scene_id, int(fg_index), int(bg_index)]).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()[:16]


def decompose_object_background(frame: np.ndarray, mask: np.ndarray) -> GuidancePair:
    """Split a frame into its masked object and masked background images.

    The two parts have disjoint support and sum back to the frame exactly.
    """
    x = check_rgb(frame)
    m = check_binary(mask)
    check_same_shape(x, m, "frame and mask")
    obj = x * m[..., None]
    bg = x * (1 - m)[..., None]
    return GuidancePair(object_image=obj, background_image=bg, mask=m)


class DatasetWriter:
    """Emits triplets under a dataset root; safe for concurrent emissions."""

    def __init__(self, out_dir):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._seen: set[str] = set()
        self._lock = threading.Lock()

    def emit_triplet(
        self, frame: np.ndarray, mask: np.ndarray, gt: np.ndarray, record: TripletRecord
    ) -> TripletRecord:
        """Write the three files for one record and return the record."""
        x = check_rgb(frame)
        m = check_binary(mask)
        g = check_rgb(gt)
        check_same_shape(x, g, "input and ground-truth frames")
        check_same_shape(x, m, "input frame and mask")
        with self._lock:
            if record.record_id in self._seen:
                raise DuplicateRecord(f"record id {record.record_id} emitted twice")
            self._seen.add(record.record_id)
        rec_dir = self.out_dir / record.scene_id / record.record_id
        rec_dir.mkdir(parents=True, exist_ok=True)
        imaging.save_image(x, rec_dir / "input.png")
        imaging.save_image(g, rec_dir / "gt.png")
        imaging.save_mask(m, rec_dir / "mask.png")
        return record

    def relative_paths(self, record_id: str, scene_id: str) -> tuple[str, str, str]:
        base = f"{scene_id}/{record_id}"
        return f"{base}/input.png", f"{base}/gt.png", f"{base}/mask.png"


def _dump_line(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def write_manifest(path, header: dict, records: list[TripletRecord]) -> Path:
    """Write header + records as JSON Lines; byte-stable for identical inputs."""
    path = Path(path)
    head = dict(header)
    head["type"] = "header"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dump_line(head))
        for record in records:
            fh.write(_dump_line(record.to_json_dict()))
    return path


def read_manifest(path) -> tuple[dict, list[TripletRecord]]:
    """Parse a manifest back into (header, records)."""
    path = Path(path)
    header: dict | None = None
    records: list[TripletRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if lineno == 1:
                if not isinstance(obj, dict) or obj.get("type") != "header":
                    raise ManifestParseError("first line must be the header object", line=1)
                header = obj
                continue
            try:
                records.append(TripletRecord.from_json_dict(obj))
            except TypeError as exc:
                raise ManifestParseError(f"bad record fields: {exc}", line=lineno) from exc
    if header is None:
        raise ManifestParseError("manifest is empty (missing header)", line=1)
    return header, records


@dataclass(frozen=True)
class StatsReport:
    count: int
    per_scene: dict[str, int]
    fg_ratio_hist: tuple[int, ...]  # 20 equal bins over [0, 1]
    mask_area_p10: int | None
    mask_area_p50: int | None
    mask_area_p90: int | None
    augmentation_counts: dict[str, int]
    mean_pair_mse: float | None

    def to_json_dict(self) -> dict:
        return {
            "count": self.count,
            "per_scene": self.per_scene,
            "fg_ratio_hist": list(self.fg_ratio_hist),
            "mask_area_quantiles": {
                "p10": self.mask_area_p10,
                "p50": self.mask_area_p50,
                "p90": self.mask_area_p90,
            },
            "augmentation_counts": self.augmentation_counts,
            "mean_pair_mse": self.mean_pair_mse,
        }


def _nearest_rank(sorted_values: list[int], q: float) -> int:
    rank = max(1, math.ceil(q * len(sorted_values)))
    return sorted_values[rank - 1]


def dataset_stats(manifest_path) -> StatsReport:
    """Deterministic summary of a manifest (nearest-rank quantiles)."""
    _, records = read_manifest(manifest_path)
    per_scene: dict[str, int] = {}
    hist = [0] * _HIST_BINS
    aug_counts: dict[str, int] = {}
    areas: list[int] = []
    mses: list[float] = []
    for rec in records:
        per_scene[rec.scene_id] = per_scene.get(rec.scene_id, 0) + 1
        bin_idx = min(int(rec.fg_ratio * _HIST_BINS), _HIST_BINS - 1)
        hist[bin_idx] += 1
        aug_counts[rec.augmentation] = aug_counts.get(rec.augmentation, 0) + 1
        areas.append(rec.mask_area_px)
        mses.append(rec.pair_mse)
    areas.sort()
    return StatsReport(
        count=len(records),
        per_scene=dict(sorted(per_scene.items())),
        fg_ratio_hist=tuple(hist),
        mask_area_p10=_nearest_rank(areas, 0.10) if areas else None,
        mask_area_p50=_nearest_rank(areas, 0.50) if areas else None,
        mask_area_p90=_nearest_rank(areas, 0.90) if areas else None,
        augmentation_counts=dict(sorted(aug_counts.items())),
        mean_pair_mse=float(np.mean(mses)) if mses else None,
    )


def validate_dataset(manifest_path) -> list[tuple[str, str]]:
    """Re-check every record's files, dimensions and decomposition identity.

    Returns a list of (record_id, problem) pairs; empty means the dataset is
    consistent.
    """
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    header, records = read_manifest(manifest_path)
    delta = header.get("delta")
    failures: list[tuple[str, str]] = []
    for rec in records:
        try:
            frame = imaging.load_image(root / rec.input_frame)
            gt = imaging.load_image(root / rec.gt_frame)
            mask = imaging.load_mask(root / rec.mask)
            check_same_shape(frame, gt, "input and gt")
            check_same_shape(frame, mask, "input and mask")
            if delta is not None and not rec.fg_ratio > delta:
                raise ValueError(f"fg_ratio {rec.fg_ratio} does not exceed delta {delta}")
            if int(mask.sum()) != rec.mask_area_px:
                raise ValueError(
                    f"mask area {int(mask.sum())} != recorded {rec.mask_area_px}"
                )
            pair = decompose_object_background(frame, mask)
            if not np.array_equal(
                pair.object_image.astype(np.int64) + pair.background_image.astype(np.int64),
                frame.astype(np.int64),
            ):
                raise ValueError("object + background != input")
            if np.any(pair.object_image[mask == 0]) or np.any(pair.background_image[mask == 1]):
                raise ValueError("object/background supports are not disjoint")
        except (OSError, ValueError, DimensionMismatch) as exc:
            failures.append((rec.record_id, str(exc)))
    return failures
