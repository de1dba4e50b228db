"""Exception types shared across the pipeline.

Plain I/O failures (missing files, unwritable paths) surface as the
builtin ``OSError`` family; everything domain-specific lives here.
"""

from __future__ import annotations


class PipelineError(Exception):
    """Base class for all domain errors raised by this package."""


class DecodeError(PipelineError):
    """Image bytes could not be decoded (corrupt or unsupported format)."""


class DimensionMismatch(PipelineError, ValueError):
    """Two rasters that must share dimensions do not."""


class InvalidParams(PipelineError, ValueError):
    """A parameter block violates its invariants."""


class TooFewFrames(PipelineError):
    """A scene is too short to process (needs warmup + at least 2 frames)."""


class EmptyCandidates(PipelineError):
    """No background frames available to pair against."""


class MaskTooSmall(PipelineError):
    """Mask has too few foreground pixels for the requested measurement."""


class EmptyMask(PipelineError):
    """Mask or segmentation map has no foreground pixels where some are required."""


class InvalidRle(PipelineError, ValueError):
    """Run-length encoding is inconsistent with the declared dimensions."""


class TooFewSamples(PipelineError):
    """An estimator needs more samples than were provided."""


class CountMismatch(PipelineError, ValueError):
    """Two paired collections differ in length."""


class NumericalFailure(PipelineError):
    """A numerical routine failed to converge or produced a nonsensical value."""


class AlignmentError(PipelineError):
    """Prediction/ground-truth/mask directories do not line up by filename."""


class SidecarError(PipelineError):
    """The model sidecar is unreachable or returned an invalid response."""


class DuplicateRecord(PipelineError):
    """The same record id was emitted twice in one run."""


class ManifestParseError(PipelineError):
    """A manifest line is not valid JSON or violates the manifest schema."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ConfigError(PipelineError):
    """Run configuration is malformed (unknown keys, bad values)."""
