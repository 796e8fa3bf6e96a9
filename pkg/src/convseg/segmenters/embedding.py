"""Embedding-based tiler: the block-similarity curve is computed from dense
utterance vectors instead of term counts, then boundaries fall at the same
smoothed valleys as in the lexical tiler.
"""
from __future__ import annotations

import logging

import numpy as np

from ..corpus import Document, Segmentation
from .base import UtteranceSegmenter, _single_segment, boundaries_to_segmentation
from .tiling import boundaries_from_similarities, cosine

logger = logging.getLogger(__name__)


def embedding_gap_similarities(vectors: np.ndarray, w: int) -> np.ndarray:
    """Cosine similarity between mean vectors of the up-to-w utterances on
    each side of every gap."""
    n = vectors.shape[0]
    sims = np.zeros(n - 1, dtype=float)
    for gap in range(n - 1):
        left = vectors[max(0, gap - w + 1) : gap + 1].mean(axis=0)
        right = vectors[gap + 1 : min(n, gap + 1 + w)].mean(axis=0)
        sims[gap] = cosine(left, right)
    return sims


class EmbeddingTilingSegmenter(UtteranceSegmenter):
    """Valley segmenter over dense utterance embeddings.

    provider: any object with vectors_for_document(doc) -> (n, d) array,
    e.g. the HTTP embedding client or the precomputed-vector file reader.
    """

    def __init__(
        self,
        provider=None,
        w: int = 2,
        smoothing_width: int = 3,
        threshold_policy: str = "mean_minus_half_stddev",
        top_k: int | None = None,
    ):
        self.provider = provider
        self.w = w
        self.smoothing_width = smoothing_width
        self.threshold_policy = threshold_policy
        self.top_k = top_k

    def _segment_document(self, doc: Document) -> Segmentation:
        if self.provider is None:
            raise ValueError("EmbeddingTilingSegmenter needs an embedding provider")
        if self.w < 1:
            raise ValueError(f"w must be >= 1, got {self.w}")
        if doc.n_utterances < 2 * self.w:
            logger.warning(
                "document %s has %d utterances (< 2*w = %d): emitting a single segment",
                doc.doc_id,
                doc.n_utterances,
                2 * self.w,
            )
            return _single_segment(doc)
        vectors = np.asarray(self.provider.vectors_for_document(doc), dtype=float)
        if vectors.ndim != 2 or vectors.shape[0] != doc.n_utterances:
            raise ValueError(
                f"provider returned shape {vectors.shape} for {doc.n_utterances} utterances"
            )
        if not np.all(np.isfinite(vectors)):
            raise ValueError(f"provider returned non-finite vectors for {doc.doc_id}")
        sims = embedding_gap_similarities(vectors, self.w)
        gaps = boundaries_from_similarities(
            sims, self.smoothing_width, self.threshold_policy, self.top_k
        )
        return boundaries_to_segmentation(doc, gaps)
