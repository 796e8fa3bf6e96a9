"""Boundary corruption: merge runs of gold segments into draft blocks.

The corruption pass walks the gold segments left to right, draws a span
length L from a pmf over {1..4} (by default), and merges the next
min(L, remaining) segments into one draft block. The restoration task is to
put the removed internal boundaries back, so block borders are always a
subset of the gold boundaries.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Sequence

from .corpus import (
    Document,
    Segmentation,
    ValidationResult,
    derive_seed,
    segmentation_from_lengths,
    validate_segmentation,
)

DEFAULT_SPAN_PMF = (0.60, 0.20, 0.15, 0.05)


@dataclass(frozen=True)
class SpanDistribution:
    """Pmf over merged-span lengths 1..len(probabilities)."""

    probabilities: tuple[float, ...] = DEFAULT_SPAN_PMF

    def __post_init__(self) -> None:
        object.__setattr__(self, "probabilities", tuple(float(p) for p in self.probabilities))
        if not self.probabilities:
            raise ValueError("span distribution needs at least one length")
        if any(p < 0 for p in self.probabilities):
            raise ValueError(f"probabilities must be non-negative: {self.probabilities}")
        if abs(sum(self.probabilities) - 1.0) > 1e-9:
            raise ValueError(f"probabilities must sum to 1: {self.probabilities}")

    @property
    def mean(self) -> float:
        return sum((i + 1) * p for i, p in enumerate(self.probabilities))

    def draw(self, rng: random.Random) -> int:
        roll = rng.random()
        cumulative = 0.0
        for length, probability in enumerate(self.probabilities, start=1):
            cumulative += probability
            if roll < cumulative:
                return length
        return len(self.probabilities)


@dataclass(frozen=True)
class DraftBlocks:
    """Ordered blocks of consecutive line ids; the corrupted view of a
    segmentation that a restorer must split back apart."""

    doc_id: str
    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "blocks", tuple(tuple(int(i) for i in block) for block in self.blocks)
        )

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def border_starts(self) -> tuple[int, ...]:
        return tuple(block[0] for block in self.blocks)

    def border_ends(self) -> tuple[int, ...]:
        return tuple(block[-1] for block in self.blocks)

    def as_segmentation(self) -> Segmentation:
        return segmentation_from_lengths(
            self.doc_id,
            [len(block) for block in self.blocks],
            first_line_id=self.blocks[0][0] if self.blocks else 1,
        )

    def to_obj(self) -> list[list[int]]:
        return [list(block) for block in self.blocks]

    def to_json(self) -> str:
        return json.dumps(self.to_obj())


def draft_blocks_from_obj(items: Sequence[Sequence[int]], doc_id: str) -> DraftBlocks:
    return DraftBlocks(doc_id, tuple(tuple(int(i) for i in block) for block in items))


def validate_blocks(doc: Document, blocks: DraftBlocks) -> ValidationResult:
    """Blocks must tile the document exactly like a segmentation."""
    return validate_segmentation(doc, blocks.as_segmentation())


def corrupt(
    gold: Segmentation,
    distribution: SpanDistribution | None = None,
    seed: int = 0,
) -> DraftBlocks:
    """Merge gold segments into draft blocks with pmf-driven span lengths.

    A drawn length is clipped to the segments that remain, so trailing blocks
    can be shorter than drawn. Deterministic for a given (gold, seed).
    """
    if distribution is None:
        distribution = SpanDistribution()
    rng = random.Random(seed)
    segments = gold.segments
    blocks: list[tuple[int, ...]] = []
    index = 0
    while index < len(segments):
        length = min(distribution.draw(rng), len(segments) - index)
        merged: list[int] = []
        for segment in segments[index : index + length]:
            merged.extend(segment.line_ids)
        blocks.append(tuple(merged))
        index += length
    return DraftBlocks(gold.doc_id, tuple(blocks))


def corruption_rate(gold: Segmentation, blocks: DraftBlocks) -> float:
    """Fraction of gold boundaries removed by the merge. 0.0 when gold has a
    single segment (no boundaries to remove)."""
    gold_boundaries = set(gold.boundary_line_ids())
    if not gold_boundaries:
        return 0.0
    kept = {block[-1] for block in blocks.blocks[:-1]}
    stray = kept - gold_boundaries
    if stray:
        raise ValueError(
            f"blocks for {blocks.doc_id!r} end at non-gold boundaries: {sorted(stray)}"
        )
    return 1.0 - len(kept) / len(gold_boundaries)


def corrupt_with_doc_seed(
    gold: Segmentation, base_seed: int, distribution: SpanDistribution | None = None
) -> DraftBlocks:
    """Per-document seed derivation so corpus-level parallelism cannot change
    any document's draw sequence."""
    return corrupt(gold, distribution, seed=derive_seed(base_seed, gold.doc_id))
