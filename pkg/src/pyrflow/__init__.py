"""Coarse-to-fine recurrent all-pairs optical flow estimation.

Forward-only: a shared-weight recurrent update block refines the flow on a
stride-8 grid, again on a stride-4 grid, and a learned convex upsample
brings it to full resolution. Ships with flow container formats, benchmark
metrics, multi-dataset scheduling, and seeded augmentations.
"""

from .errors import (
    ArchiveError,
    ConfigError,
    EmptyDomainError,
    FlowFormatError,
    PyrflowError,
    ShapeError,
    TruncatedFileError,
    ValidationError,
)
from .flowfield import FlowField
from .pyramid_flow import InferenceTrace, estimate_flow
from .weights import ModelConfig, ModelWeights, init_weights, load, save

__version__ = "0.1.0"

__all__ = [
    "ArchiveError",
    "ConfigError",
    "EmptyDomainError",
    "FlowField",
    "FlowFormatError",
    "InferenceTrace",
    "ModelConfig",
    "ModelWeights",
    "PyrflowError",
    "ShapeError",
    "TruncatedFileError",
    "ValidationError",
    "estimate_flow",
    "init_weights",
    "load",
    "save",
]
