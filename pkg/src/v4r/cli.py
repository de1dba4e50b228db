"""Command-line entry point.

Subcommands:
  build     construct triplets from a directory of scene frame folders
  eval      score predictions against ground truth
  augment   apply one mask perturbation to a mask PNG
  stats     summarize a manifest
  validate  re-check every record of a built dataset

Exit codes follow the build contract: 0 success, 1 config/usage error,
2 no scenes found, 3 zero triplets emitted. Logs go to stderr; results go to
files and stdout.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import imaging
from .build import build_dataset
from .config import load_config
from .errors import AlignmentError, ConfigError, EmptyMask, InvalidParams, PipelineError, SidecarError
from .masks import AugConfig, augment_mask, dilate, erode, tight_box, AugmentedMask
from .metrics import evaluate
from .scenes import discover_scenes
from .sidecar import SidecarClient, SidecarEmbedder
from .store import dataset_stats, validate_dataset

log = logging.getLogger("v4r")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="v4r", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build", help="construct triplets from scene directories")
    p_build.add_argument("scenes_dir", type=Path)
    p_build.add_argument("out_dir", type=Path)
    p_build.add_argument("--config", type=Path, default=None, help="JSON run config")
    p_build.add_argument("--seed", type=int, default=None, help="global seed override")
    p_build.add_argument("--threads", type=int, default=None)
    p_build.add_argument("--pairing-mode", choices=["min_mse", "temporal_closest"], default=None)
    p_build.add_argument("--segmenter", default=None, help='"mog" or a sidecar base URL')
    p_build.add_argument("--augment", action="store_true", help="enable mask augmentation")

    p_eval = sub.add_parser("eval", help="evaluate predictions against ground truth")
    p_eval.add_argument("--pred", type=Path, required=True)
    p_eval.add_argument("--gt", type=Path, required=True)
    p_eval.add_argument("--masks", type=Path, default=None)
    p_eval.add_argument("--embedder", default="builtin", help='"builtin" or "sidecar:URL"')
    p_eval.add_argument("--report", type=Path, required=True)

    p_aug = sub.add_parser("augment", help="perturb a mask PNG")
    p_aug.add_argument("--mask", type=Path, required=True)
    p_aug.add_argument("--mode", required=True, help="none|box|dilate:R|erode:R|random:SEED")
    p_aug.add_argument("--out", type=Path, required=True)

    p_stats = sub.add_parser("stats", help="summarize a manifest")
    p_stats.add_argument("--manifest", type=Path, required=True)

    p_val = sub.add_parser("validate", help="re-check a built dataset")
    p_val.add_argument("--manifest", type=Path, required=True)
    return parser


def _cmd_build(args) -> int:
    try:
        overrides = {
            "global_seed": args.seed,
            "threads": args.threads,
            "pairing_mode": args.pairing_mode,
            "segmenter": args.segmenter,
        }
        config = load_config(args.config, overrides)
        if args.augment:
            config = dataclasses.replace(
                config, augment=dataclasses.replace(config.augment, enabled=True)
            )
    except (ConfigError, OSError) as exc:
        log.error("config error: %s", exc)
        return 1
    try:
        scenes = discover_scenes(args.scenes_dir)
    except OSError as exc:
        log.error("%s", exc)
        return 2
    if not scenes:
        log.error("no scenes found under %s", args.scenes_dir)
        return 2
    summary = build_dataset(scenes, args.out_dir, config)
    for outcome in summary.outcomes:
        rejected = sum(outcome.rejected.values())
        detail = f" ({outcome.rejected})" if outcome.rejected else ""
        if outcome.error:
            log.error("scene %s: failed: %s", outcome.scene_id, outcome.error)
        else:
            log.info(
                "scene %s: accepted=%d rejected=%d%s",
                outcome.scene_id, outcome.accepted, rejected, detail,
            )
    print(summary.manifest_path)
    if summary.total_accepted == 0:
        log.error("no triplets emitted")
        return 3
    return 0


def _cmd_eval(args) -> int:
    if args.embedder == "builtin":
        embedder = None
    elif args.embedder.startswith("sidecar:"):
        embedder = SidecarEmbedder(SidecarClient(args.embedder.split(":", 1)[1]))
    else:
        log.error('embedder must be "builtin" or "sidecar:URL", got %r', args.embedder)
        return 1
    try:
        report = evaluate(args.pred, args.gt, mask_dir=args.masks, embedder=embedder)
    except (AlignmentError, SidecarError, PipelineError, OSError) as exc:
        log.error("%s", exc)
        return 1
    text = report.to_json()
    args.report.write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def _parse_aug_mode(mode: str, mask) -> AugmentedMask:
    if mode == "none":
        return AugmentedMask(mask=mask, kind="none", radius=None)
    if mode == "box":
        return AugmentedMask(mask=tight_box(mask), kind="box", radius=None)
    head, _, arg = mode.partition(":")
    if head in ("dilate", "erode"):
        radius = int(arg)
        out = dilate(mask, radius) if head == "dilate" else erode(mask, radius)
        return AugmentedMask(mask=out, kind=head, radius=radius)
    if head == "random":
        return augment_mask(mask, int(arg), AugConfig())
    raise ValueError(f"unknown augment mode {mode!r}")


def _cmd_augment(args) -> int:
    try:
        mask = imaging.load_mask(args.mask)
        if int(mask.sum()) == 0:
            raise EmptyMask(f"{args.mask} has no foreground pixels")
        result = _parse_aug_mode(args.mode, mask)
        imaging.save_mask(result.mask, args.out)
    except (PipelineError, InvalidParams, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 1
    print(f"kind={result.kind} radius={result.radius if result.radius is not None else '-'}")
    return 0


def _cmd_stats(args) -> int:
    try:
        report = dataset_stats(args.manifest)
    except (PipelineError, OSError) as exc:
        log.error("%s", exc)
        return 1
    print(json.dumps(report.to_json_dict(), sort_keys=True, indent=2))
    return 0


def _cmd_validate(args) -> int:
    try:
        failures = validate_dataset(args.manifest)
    except (PipelineError, OSError) as exc:
        log.error("%s", exc)
        return 1
    if failures:
        record_id, problem = failures[0]
        log.error("record %s failed validation: %s (%d failing total)", record_id, problem, len(failures))
        return 1
    print("ok")
    return 0


_COMMANDS = {
    "build": _cmd_build,
    "eval": _cmd_eval,
    "augment": _cmd_augment,
    "stats": _cmd_stats,
    "validate": _cmd_validate,
}


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    args = _parser().parse_args(argv)
    return _COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
