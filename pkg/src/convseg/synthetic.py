"""Synthetic topic-shift corpora for calibration and self-tests.

Each document is a sequence of passages with disjoint vocabularies, so the
true boundaries are unambiguous and lexical segmenters have a fair target.
Every utterance carries its topic's full vocabulary exactly once (in a
shuffled order), which keeps same-topic term vectors identical: the block
similarity curve is perfectly flat inside a segment and dips only at seams.
"""
from __future__ import annotations

import random

from .corpus import (
    Document,
    Segmentation,
    Utterance,
    derive_seed,
    segmentation_from_lengths,
)


def make_topic_shift_document(
    doc_id: str,
    n_segments: int,
    n_utterances: int,
    seed: int,
    vocabulary_size: int = 12,
    min_segment_length: int = 4,
    data_source: str = "other",
    language_clue: str = "synthetic",
    genre: str = "synthetic",
) -> tuple[Document, Segmentation]:
    """One document whose segments draw from disjoint topic vocabularies."""
    if n_segments < 1:
        raise ValueError("need at least one segment")
    if vocabulary_size < 1:
        raise ValueError("need a non-empty topic vocabulary")
    if n_utterances < n_segments * min_segment_length:
        raise ValueError(
            f"{n_utterances} utterances cannot host {n_segments} segments "
            f"of at least {min_segment_length}"
        )
    rng = random.Random(seed)
    # Random composition of n_utterances into n_segments parts >= min length.
    spare = n_utterances - n_segments * min_segment_length
    cuts = sorted(rng.randint(0, spare) for _ in range(n_segments - 1))
    extras = [b - a for a, b in zip([0, *cuts], [*cuts, spare])]
    lengths = [min_segment_length + extra for extra in extras]

    utterances: list[Utterance] = []
    line_id = 1
    for topic_index, length in enumerate(lengths):
        vocabulary = [f"topic{topic_index}word{j}" for j in range(vocabulary_size)]
        for _ in range(length):
            words = vocabulary[:]
            rng.shuffle(words)
            utterances.append(
                Utterance(line_id=line_id, text=" ".join(words), speaker=f"S{line_id % 2 + 1}")
            )
            line_id += 1
    doc = Document(
        doc_id=doc_id,
        utterances=tuple(utterances),
        data_source=data_source,
        language_clue=language_clue,
        genre=genre,
    )
    gold = segmentation_from_lengths(
        doc_id, lengths, topics=[f"topic {i}" for i in range(n_segments)]
    )
    return doc, gold


def make_topic_shift_corpus(
    n_docs: int,
    seed: int,
    segments_range: tuple[int, int] = (2, 5),
    utterances_range: tuple[int, int] = (40, 80),
    doc_id_prefix: str = "synthetic",
) -> list[tuple[Document, Segmentation]]:
    rng = random.Random(seed)
    pairs = []
    for index in range(n_docs):
        n_segments = rng.randint(*segments_range)
        n_utterances = rng.randint(*utterances_range)
        doc_id = f"{doc_id_prefix}-{index:03d}"
        pairs.append(
            make_topic_shift_document(
                doc_id,
                n_segments,
                n_utterances,
                seed=derive_seed(seed, doc_id),
            )
        )
    return pairs
