"""Run configuration: JSON file with full defaulting, strict unknown-key
rejection, and a canonical digest embedded in manifests.

``threads`` is an execution knob, not a dataset property: it is excluded from
the persisted header/digest so thread count can never change output bytes.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

from .background import MogParams
from .errors import ConfigError, InvalidParams
from .masks import AugConfig, CleanupConfig
from .scenes import PAIRING_MODES, GateConfig

__all__ = ["RunConfig", "load_config", "config_digest"]

SIDECAR_URL_ENV = "V4R_SIDECAR_URL"


@dataclass(frozen=True)
class RunConfig:
    delta: float = 0.15
    mog: MogParams = field(default_factory=MogParams)
    pairing_mode: str = "min_mse"
    pairing_window: int | None = None
    gate: GateConfig = field(default_factory=GateConfig)
    cleanup: CleanupConfig = field(default_factory=CleanupConfig)
    augment: AugConfig = field(default_factory=AugConfig)
    global_seed: int = 0
    segmenter: str = "mog"  # "mog" or a sidecar base URL
    threads: int | None = None

    def validate(self) -> "RunConfig":
        if not 0.0 <= self.delta <= 1.0:
            raise ConfigError(f"delta must be in [0, 1], got {self.delta}")
        if self.pairing_mode not in PAIRING_MODES:
            raise ConfigError(
                f"pairing_mode must be one of {PAIRING_MODES}, got {self.pairing_mode!r}"
            )
        if self.pairing_window is not None and self.pairing_window < 1:
            raise ConfigError("pairing_window must be >= 1 when set")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads must be >= 1 when set")
        if self.global_seed < 0:
            raise ConfigError("global_seed must be a non-negative integer")
        if self.segmenter != "mog" and not self.segmenter.startswith(("http://", "https://")):
            raise ConfigError(
                f"segmenter must be 'mog' or an http(s) sidecar URL, got {self.segmenter!r}"
            )
        try:
            self.mog.validate()
            self.gate.validate()
            self.cleanup.validate()
            self.augment.validate()
        except InvalidParams as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def to_json_dict(self, include_threads: bool = False) -> dict:
        out = {
            "delta": self.delta,
            "mog": self.mog.as_dict(),
            "pairing_mode": self.pairing_mode,
            "pairing_window": self.pairing_window,
            "gate": {f.name: getattr(self.gate, f.name) for f in fields(GateConfig)},
            "cleanup": {f.name: getattr(self.cleanup, f.name) for f in fields(CleanupConfig)},
            "augment": {f.name: getattr(self.augment, f.name) for f in fields(AugConfig)},
            "global_seed": self.global_seed,
            "segmenter": self.segmenter,
        }
        if include_threads:
            out["threads"] = self.threads
        return out

    @classmethod
    def from_json_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key, sub_cls in (
            ("mog", MogParams),
            ("gate", GateConfig),
            ("cleanup", CleanupConfig),
            ("augment", AugConfig),
        ):
            if key in kwargs:
                kwargs[key] = _sub_config(sub_cls, kwargs[key], key)
        try:
            cfg = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg.validate()


def _sub_config(sub_cls, data, where: str):
    if isinstance(data, sub_cls):
        return data
    if not isinstance(data, dict):
        raise ConfigError(f"{where!r} must be an object")
    known = {f.name for f in fields(sub_cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown keys under {where!r}: {sorted(unknown)}")
    try:
        return sub_cls(**data)
    except TypeError as exc:
        raise ConfigError(f"bad {where!r} block: {exc}") from exc


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Load a JSON config file (all keys optional) and apply CLI overrides.

    Precedence: override > file > {SIDECAR_URL_ENV} environment (segmenter
    only) > built-in default.
    """
    data: dict = {}
    if path is not None:
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top-level config must be an object")
        data = raw
    env_url = os.environ.get(SIDECAR_URL_ENV)
    if env_url and "segmenter" not in data:
        data["segmenter"] = env_url
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return RunConfig.from_json_dict(data)


def config_digest(config: RunConfig) -> str:
    """Hex digest of the canonical (thread-free) config JSON."""
    canon = json.dumps(config.to_json_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]
