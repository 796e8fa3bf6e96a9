"""Lexical segmenters: sliding-window tiling and rank-matrix divisive
clustering, both operating on whole utterances as the atomic unit.
"""
from __future__ import annotations

import bisect
import logging
import math
from collections import Counter

import numpy as np

from ..corpus import Document, Segmentation
from ..normalize import DEFAULT_PROFILE, NormalizationProfile, terms
from .base import UtteranceSegmenter, _single_segment, boundaries_to_segmentation
from .tiling import boundaries_from_similarities

logger = logging.getLogger(__name__)


def _term_vectors(doc: Document, profile: NormalizationProfile) -> list[Counter]:
    return [Counter(terms(u.text, profile)) for u in doc.utterances]


def _counter_cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    dot = sum(count * b.get(term, 0) for term, count in a.items())
    norm_a = math.sqrt(sum(c * c for c in a.values()))
    norm_b = math.sqrt(sum(c * c for c in b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return min(1.0, dot / (norm_a * norm_b))


def gap_similarities(vectors: list[Counter], w: int) -> np.ndarray:
    """Cosine similarity between the blocks of up to w utterances on each
    side of every gap (blocks truncate at the document edges)."""
    n = len(vectors)
    sims = np.zeros(n - 1, dtype=float)
    for gap in range(n - 1):
        left: Counter = Counter()
        for i in range(max(0, gap - w + 1), gap + 1):
            left.update(vectors[i])
        right: Counter = Counter()
        for i in range(gap + 1, min(n, gap + 1 + w)):
            right.update(vectors[i])
        sims[gap] = _counter_cosine(left, right)
    return sims


class TextTilingSegmenter(UtteranceSegmenter):
    """Boundary = deep valley in the smoothed block-similarity curve.

    w: block width in utterances. smoothing_width: odd moving-average window.
    threshold_policy: 'mean_minus_half_stddev' (default) or 'top_k' with
    top_k boundaries. profile: normalization applied before counting terms.
    """

    def __init__(
        self,
        w: int = 2,
        smoothing_width: int = 3,
        threshold_policy: str = "mean_minus_half_stddev",
        top_k: int | None = None,
        profile: NormalizationProfile | None = None,
    ):
        self.w = w
        self.smoothing_width = smoothing_width
        self.threshold_policy = threshold_policy
        self.top_k = top_k
        self.profile = profile

    def _segment_document(self, doc: Document) -> Segmentation:
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
        profile = self.profile if self.profile is not None else DEFAULT_PROFILE
        vectors = _term_vectors(doc, profile)
        sims = gap_similarities(vectors, self.w)
        gaps = boundaries_from_similarities(
            sims, self.smoothing_width, self.threshold_policy, self.top_k
        )
        return boundaries_to_segmentation(doc, gaps)


def similarity_matrix(vectors: list[Counter]) -> np.ndarray:
    """Dense utterance-by-utterance cosine matrix."""
    vocab: dict[str, int] = {}
    for vec in vectors:
        for term in vec:
            vocab.setdefault(term, len(vocab))
    dense = np.zeros((len(vectors), max(len(vocab), 1)), dtype=float)
    for row, vec in enumerate(vectors):
        for term, count in vec.items():
            dense[row, vocab[term]] = count
    norms = np.linalg.norm(dense, axis=1)
    safe = np.where(norms == 0.0, 1.0, norms)
    unit = dense / safe[:, None]
    return unit @ unit.T


def rank_transform(matrix: np.ndarray, rank_mask: int) -> np.ndarray:
    """Replace each cell by the fraction of its neighbors, inside a
    rank_mask x rank_mask window clipped at the edges and excluding the cell
    itself, holding a strictly lower value."""
    if rank_mask < 1 or rank_mask % 2 == 0:
        raise ValueError(f"rank_mask must be odd and >= 1, got {rank_mask}")
    radius = rank_mask // 2
    n = matrix.shape[0]
    lower = np.zeros((n, n), dtype=float)
    valid = np.zeros((n, n), dtype=float)
    for di in range(-radius, radius + 1):
        for dj in range(-radius, radius + 1):
            if di == 0 and dj == 0:
                continue
            src_i = slice(max(0, di), n + min(0, di))
            dst_i = slice(max(0, -di), n + min(0, -di))
            src_j = slice(max(0, dj), n + min(0, dj))
            dst_j = slice(max(0, -dj), n + min(0, -dj))
            lower[dst_i, dst_j] += matrix[src_i, src_j] < matrix[dst_i, dst_j]
            valid[dst_i, dst_j] += 1.0
    return lower / valid


def _integral_image(matrix: np.ndarray) -> np.ndarray:
    n = matrix.shape[0]
    integral = np.zeros((n + 1, n + 1), dtype=float)
    integral[1:, 1:] = matrix.cumsum(axis=0).cumsum(axis=1)
    return integral


def split_sequence(rank: np.ndarray) -> list[tuple[int, float]]:
    """Greedy divisive splitting of [0, n) maximizing inside density
    D = (sum of within-segment rank cells) / (sum of squared segment sizes).

    Returns the full sequence of (split_point, density_gain) down to
    singleton segments; callers decide where to stop.
    """
    n = rank.shape[0]
    integral = _integral_image(rank)

    def block(a: int, b: int) -> float:
        return float(integral[b, b] - integral[a, b] - integral[b, a] + integral[a, a])

    boundaries = [0, n]  # current interval edges
    inside_sum = block(0, n)
    inside_area = float(n * n)
    density = inside_sum / inside_area if inside_area else 0.0
    sequence: list[tuple[int, float]] = []
    for _ in range(n - 1):
        best: tuple[float, int, float, float] | None = None
        for a, b in zip(boundaries, boundaries[1:]):
            if b - a < 2:
                continue
            whole = block(a, b)
            for c in range(a + 1, b):
                new_sum = inside_sum - whole + block(a, c) + block(c, b)
                new_area = inside_area - (b - a) ** 2 + (c - a) ** 2 + (b - c) ** 2
                candidate = new_sum / new_area
                if best is None or candidate > best[0]:
                    best = (candidate, c, new_sum, new_area)
        if best is None:
            break
        new_density, cut, inside_sum, inside_area = best
        sequence.append((cut, new_density - density))
        density = new_density
        bisect.insort(boundaries, cut)
    return sequence


class C99Segmenter(UtteranceSegmenter):
    """Divisive segmenter over the rank-transformed similarity matrix.

    termination: 'auto_gradient' stops at the first split whose density gain
    drops below mean + c * stddev of the full gain sequence (or is not
    positive); 'fixed_k' forces exactly k segments.
    """

    def __init__(
        self,
        rank_mask: int = 11,
        termination: str = "auto_gradient",
        k: int | None = None,
        c: float = 1.2,
        profile: NormalizationProfile | None = None,
    ):
        self.rank_mask = rank_mask
        self.termination = termination
        self.k = k
        self.c = c
        self.profile = profile

    def _segment_document(self, doc: Document) -> Segmentation:
        n = doc.n_utterances
        profile = self.profile if self.profile is not None else DEFAULT_PROFILE
        vectors = _term_vectors(doc, profile)
        sims = similarity_matrix(vectors)
        if not np.any(sims):
            logger.warning(
                "document %s yields an all-zero similarity matrix: emitting a single segment",
                doc.doc_id,
            )
            return _single_segment(doc)
        rank = rank_transform(sims, self.rank_mask)
        sequence = split_sequence(rank)
        if self.termination == "fixed_k":
            if self.k is None or not 1 <= self.k <= n:
                raise ValueError(f"fixed_k needs 1 <= k <= {n}, got {self.k}")
            accepted = [cut for cut, _gain in sequence[: self.k - 1]]
        elif self.termination == "auto_gradient":
            accepted = []
            if sequence:
                gains = np.asarray([gain for _cut, gain in sequence], dtype=float)
                tau = float(gains.mean() + self.c * gains.std())
                for cut, gain in sequence:
                    if gain < tau or gain <= 0:
                        break
                    accepted.append(cut)
        else:
            raise ValueError(
                f"unknown termination {self.termination!r} (use 'auto_gradient' or 'fixed_k')"
            )
        # Split point c separates utterance c-1 from c: gap index c-1.
        return boundaries_to_segmentation(doc, [cut - 1 for cut in accepted])
