"""Utterance-level topic segmentation toolkit and benchmark harness."""
from __future__ import annotations

from .corpus import (
    BoundaryVector,
    Document,
    Segment,
    Segmentation,
    SplitManifest,
    Utterance,
    ValidationResult,
    Violation,
    from_boundary_vector,
    segmentation_from_lengths,
    stratified_split,
    to_boundary_vector,
    validate_segmentation,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryVector",
    "Document",
    "Segment",
    "Segmentation",
    "SplitManifest",
    "Utterance",
    "ValidationResult",
    "Violation",
    "__version__",
    "from_boundary_vector",
    "segmentation_from_lengths",
    "stratified_split",
    "to_boundary_vector",
    "validate_segmentation",
]
