"""End-to-end dataset construction: separate, mask, pair, gate, emit.

Scenes are independent work units processed in a thread pool; all outputs are
collected, sorted by (scene_id, foreground index) and written by a single
manifest writer, so results never depend on scheduling.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import imaging
from .config import RunConfig, config_digest
from .errors import EmptyCandidates, EmptyMask, MaskTooSmall, PipelineError
from .masks import augment_mask, derive_record_seed, mog_mask_cleanup
from .scenes import (
    QualityScores,
    SceneSequence,
    blur_score,
    pair_frames,
    quality_gate,
    separate_frames,
)
from .sidecar import SidecarClient, SidecarSegmenter
from .store import DatasetWriter, TripletRecord, make_record_id, write_manifest

__all__ = ["SceneOutcome", "BuildSummary", "build_dataset", "manifest_header"]

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1


@dataclass
class SceneOutcome:
    scene_id: str
    accepted: int = 0
    rejected: dict[str, int] = field(default_factory=dict)
    error: str | None = None

    def reject(self, reason: str) -> None:
        self.rejected[reason] = self.rejected.get(reason, 0) + 1


@dataclass
class BuildSummary:
    manifest_path: Path
    outcomes: list[SceneOutcome]

    @property
    def total_accepted(self) -> int:
        return sum(o.accepted for o in self.outcomes)


def manifest_header(config: RunConfig) -> dict:
    return {
        "version": MANIFEST_VERSION,
        "config_digest": config_digest(config),
        "delta": config.delta,
        "pairing_mode": config.pairing_mode,
        "global_seed": config.global_seed,
        "config": config.to_json_dict(),
    }


def _make_segmenter(config: RunConfig):
    if config.segmenter == "mog":
        return None
    return SidecarSegmenter(SidecarClient(config.segmenter))


def _process_scene(
    scene: SceneSequence, config: RunConfig, writer: DatasetWriter, segmenter
) -> tuple[SceneOutcome, list[TripletRecord]]:
    outcome = SceneOutcome(scene_id=scene.scene_id)
    records: list[TripletRecord] = []
    path_of = dict(scene.frames)

    separation = separate_frames(scene, config.mog, config.delta)
    if not separation.foreground:
        log.info("scene %s: no foreground frames", scene.scene_id)
        return outcome, records
    if not separation.background:
        log.info("scene %s: no background frames to pair against", scene.scene_id)
        return outcome, records

    backgrounds = [
        (bg.index, imaging.load_image(path_of[bg.index])) for bg in separation.background
    ]
    bg_by_index = dict(backgrounds)

    for fg in separation.foreground:
        frame = imaging.load_image(path_of[fg.index])
        try:
            if segmenter is None:
                mask = mog_mask_cleanup(fg.seg_map, config.cleanup)
            else:
                mask = segmenter.segment(path_of[fg.index], scene.prompt)
        except EmptyMask:
            outcome.reject("empty_mask")
            continue

        try:
            pair = pair_frames(
                frame, fg.index, backgrounds, mode=config.pairing_mode, window=config.pairing_window
            )
        except EmptyCandidates:
            outcome.reject("no_pair_in_window")
            continue

        try:
            blur = blur_score(imaging.to_gray(frame), mask)
        except MaskTooSmall:
            outcome.reject("tiny_mask")
            continue
        scores = QualityScores(
            blur_score=blur,
            mask_area_px=int(mask.sum()),
            frame_area_px=mask.shape[0] * mask.shape[1],
        )
        reason = quality_gate(scores, config.gate)
        if reason is not None:
            outcome.reject(reason)
            continue

        record_id = make_record_id(scene.scene_id, fg.index, pair.bg_index)
        aug_kind, aug_radius = "none", None
        if config.augment.enabled:
            augmented = augment_mask(
                mask, derive_record_seed(config.global_seed, record_id), config.augment
            )
            mask, aug_kind, aug_radius = augmented.mask, augmented.kind, augmented.radius

        input_rel, gt_rel, mask_rel = writer.relative_paths(record_id, scene.scene_id)
        record = TripletRecord(
            record_id=record_id,
            scene_id=scene.scene_id,
            input_frame=input_rel,
            gt_frame=gt_rel,
            mask=mask_rel,
            fg_ratio=fg.fg_ratio,
            pair_mse=pair.pair_mse,
            temporal_gap=pair.temporal_gap,
            blur_score=blur,
            mask_area_px=int(mask.sum()),
            augmentation=aug_kind,
            aug_radius=aug_radius,
            pairing_mode=config.pairing_mode,
            source_fg_index=fg.index,
            source_bg_index=pair.bg_index,
        )
        writer.emit_triplet(frame, mask, bg_by_index[pair.bg_index], record)
        records.append(record)
        outcome.accepted += 1
    return outcome, records


def build_dataset(scenes: list[SceneSequence], out_dir, config: RunConfig) -> BuildSummary:
    """Process all scenes and write the dataset plus its manifest."""
    config.validate()
    writer = DatasetWriter(out_dir)
    segmenter = _make_segmenter(config)
    workers = config.threads or 1

    outcomes: list[SceneOutcome] = []
    all_records: list[TripletRecord] = []

    def run_one(scene: SceneSequence) -> tuple[SceneOutcome, list[TripletRecord]]:
        try:
            return _process_scene(scene, config, writer, segmenter)
        except (PipelineError, OSError) as exc:
            log.error("scene %s failed: %s", scene.scene_id, exc)
            return SceneOutcome(scene_id=scene.scene_id, error=str(exc)), []

    if workers == 1:
        results = [run_one(s) for s in scenes]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, scenes))

    for outcome, records in results:
        outcomes.append(outcome)
        all_records.extend(records)
    all_records.sort(key=lambda r: (r.scene_id, r.source_fg_index))

    manifest_path = write_manifest(
        Path(out_dir) / "manifest.jsonl", manifest_header(config), all_records
    )
    return BuildSummary(manifest_path=manifest_path, outcomes=outcomes)
