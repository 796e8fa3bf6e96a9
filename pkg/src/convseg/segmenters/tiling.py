"""Shared valley-finding machinery for similarity-curve segmenters.

Both the lexical tiler and the embedding tiler reduce a document to one
similarity score per gap between adjacent utterances, then place boundaries
at sufficiently deep valleys of the smoothed curve.
"""
from __future__ import annotations

import numpy as np

THRESHOLD_POLICIES = ("mean_minus_half_stddev", "top_k")

# Depths below this are indistinguishable from cosine rounding noise on a
# flat similarity curve and never count as boundaries.
_DEPTH_EPSILON = 1e-9


def moving_average(scores: np.ndarray, width: int) -> np.ndarray:
    """Centered moving average with an odd window, truncated at the edges."""
    if width < 1 or width % 2 == 0:
        raise ValueError(f"smoothing width must be odd and >= 1, got {width}")
    if width == 1 or scores.size <= 1:
        return scores.astype(float, copy=True)
    half = width // 2
    cumulative = np.concatenate(([0.0], np.cumsum(scores, dtype=float)))
    n = scores.size
    starts = np.maximum(np.arange(n) - half, 0)
    ends = np.minimum(np.arange(n) + half + 1, n)
    return (cumulative[ends] - cumulative[starts]) / (ends - starts)


def gap_depths(scores: np.ndarray) -> np.ndarray:
    """Valley depth per gap; non-valleys get 0.

    A gap is a valley candidate when its score is <= every existing
    neighbor. Depth is (left_peak - score) + (right_peak - score), where each
    peak is reached by climbing monotonically away from the gap. Flat plateaus
    produce zero depth and are therefore never boundaries.
    """
    n = scores.size
    depths = np.zeros(n, dtype=float)
    for i in range(n):
        if i > 0 and scores[i] > scores[i - 1]:
            continue
        if i < n - 1 and scores[i] > scores[i + 1]:
            continue
        left_peak = scores[i]
        j = i - 1
        while j >= 0 and scores[j] >= left_peak:
            left_peak = scores[j]
            j -= 1
        right_peak = scores[i]
        j = i + 1
        while j < n and scores[j] >= right_peak:
            right_peak = scores[j]
            j += 1
        depths[i] = (left_peak - scores[i]) + (right_peak - scores[i])
    return depths


def pick_boundaries(
    depths: np.ndarray,
    threshold_policy: str = "mean_minus_half_stddev",
    top_k: int | None = None,
) -> list[int]:
    """Select boundary gaps from the depth array.

    mean_minus_half_stddev: keep gaps with depth strictly above
    mean(depths) - stddev(depths)/2 (and above zero, so a flat curve yields
    nothing). top_k: keep the k deepest positive-depth gaps, earlier gaps
    winning ties.
    """
    if threshold_policy == "mean_minus_half_stddev":
        if depths.size == 0:
            return []
        cutoff = float(depths.mean() - depths.std() / 2)
        return [
            i
            for i in range(depths.size)
            if depths[i] > cutoff and depths[i] > _DEPTH_EPSILON
        ]
    if threshold_policy == "top_k":
        if top_k is None or top_k < 0:
            raise ValueError("top_k policy needs a non-negative top_k")
        candidates = [i for i in range(depths.size) if depths[i] > _DEPTH_EPSILON]
        candidates.sort(key=lambda i: (-depths[i], i))
        return sorted(candidates[:top_k])
    raise ValueError(
        f"unknown threshold policy {threshold_policy!r}; expected one of {THRESHOLD_POLICIES}"
    )


def boundaries_from_similarities(
    similarities: np.ndarray,
    smoothing_width: int,
    threshold_policy: str,
    top_k: int | None,
) -> list[int]:
    smoothed = moving_average(np.asarray(similarities, dtype=float), smoothing_width)
    depths = gap_depths(smoothed)
    return pick_boundaries(depths, threshold_policy=threshold_policy, top_k=top_k)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity clamped into [-1, 1]; zero vectors give 0."""
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))
