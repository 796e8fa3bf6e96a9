"""Segmenter estimator base class and the degenerate baselines.

Segmenters follow the familiar estimator protocol: construct with
parameters, fit (a no-op returning self; nothing here trains), and predict
on a sequence of documents to get one segmentation per document.
get_params/set_params come from the estimator base and feed run manifests.
"""
from __future__ import annotations

import logging
from typing import Sequence

from sklearn.base import BaseEstimator

from ..corpus import Document, Segmentation, segmentation_from_lengths

logger = logging.getLogger(__name__)


class SegmenterError(RuntimeError):
    """A segmenter could not produce a segmentation for a document."""


class UtteranceSegmenter(BaseEstimator):
    """Base class: turns documents into topic segmentations."""

    def fit(self, X: Sequence[Document] | None = None, y: object = None) -> "UtteranceSegmenter":
        return self

    def predict(self, X: Sequence[Document]) -> list[Segmentation]:
        return [self.segment(doc) for doc in X]

    def segment(self, doc: Document) -> Segmentation:
        if not isinstance(doc, Document):
            raise TypeError(f"expected a Document, got {type(doc).__name__}")
        if doc.n_utterances < 2:
            return _single_segment(doc)
        return self._segment_document(doc)

    def _segment_document(self, doc: Document) -> Segmentation:
        raise NotImplementedError


def _single_segment(doc: Document) -> Segmentation:
    return segmentation_from_lengths(
        doc.doc_id, [doc.n_utterances], first_line_id=doc.first_line_id
    )


def boundaries_to_segmentation(doc: Document, gap_indices: Sequence[int]) -> Segmentation:
    """Build a segmentation from 0-based gap indices (gap g separates
    utterance g from g+1)."""
    lengths = []
    previous = -1
    for gap in sorted(set(gap_indices)):
        if gap < 0 or gap >= doc.n_utterances - 1:
            raise ValueError(f"gap index {gap} out of range for {doc.n_utterances} utterances")
        lengths.append(gap - previous)
        previous = gap
    lengths.append(doc.n_utterances - 1 - previous)
    return segmentation_from_lengths(doc.doc_id, lengths, first_line_id=doc.first_line_id)


class DegenerateSegmenter(UtteranceSegmenter):
    """Reference baselines: no boundaries at all, or a boundary at every gap."""

    def __init__(self, strategy: str = "none"):
        self.strategy = strategy

    def _segment_document(self, doc: Document) -> Segmentation:
        if self.strategy == "none":
            return _single_segment(doc)
        if self.strategy == "all":
            return segmentation_from_lengths(
                doc.doc_id, [1] * doc.n_utterances, first_line_id=doc.first_line_id
            )
        raise ValueError(f"unknown strategy {self.strategy!r} (use 'none' or 'all')")
