from __future__ import annotations

import pytest

from convseg.corpus import Document, Segmentation, Utterance, segmentation_from_lengths


def make_document(n: int, doc_id: str = "doc", first_line_id: int = 1, **meta) -> Document:
    utterances = tuple(
        Utterance(
            line_id=first_line_id + i,
            text=f"utterance number {i} text",
            speaker=f"spk{i % 2}",
        )
        for i in range(n)
    )
    return Document(doc_id=doc_id, utterances=utterances, **meta)


def make_segmentation(
    doc_id: str, lengths, first_line_id: int = 1, topics=None
) -> Segmentation:
    return segmentation_from_lengths(
        doc_id, lengths, first_line_id=first_line_id, topics=topics
    )


@pytest.fixture
def doc10() -> Document:
    return make_document(10)
