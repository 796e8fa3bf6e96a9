"""Tests for the synthetic topic-shift corpus generator."""
import pytest

from convseg.corpus import validate_segmentation
from convseg.synthetic import make_topic_shift_corpus, make_topic_shift_document


class TestTopicShiftDocument:
    def test_shape_and_gold_validity(self):
        doc, gold = make_topic_shift_document("d", n_segments=3, n_utterances=30, seed=1)
        assert doc.n_utterances == 30
        assert len(gold.segments) == 3
        assert validate_segmentation(doc, gold).ok
        assert all(len(s.line_ids) >= 4 for s in gold.segments)

    def test_disjoint_vocabularies(self):
        doc, gold = make_topic_shift_document("d", n_segments=4, n_utterances=24, seed=5)
        seen_by_segment = []
        for segment in gold.segments:
            tokens = set()
            for line_id in segment.line_ids:
                tokens.update(doc.utterance(line_id).text.split())
            seen_by_segment.append(tokens)
        for i in range(len(seen_by_segment)):
            for j in range(i + 1, len(seen_by_segment)):
                assert not (seen_by_segment[i] & seen_by_segment[j])

    def test_topic_prefix_matches_segment_order(self):
        doc, gold = make_topic_shift_document("d", n_segments=2, n_utterances=10, seed=2)
        for index, segment in enumerate(gold.segments):
            first_token = doc.utterance(segment.line_ids[0]).text.split()[0]
            assert first_token.startswith(f"topic{index}word")
            assert segment.topic == f"topic {index}"

    def test_each_utterance_covers_its_vocabulary_once(self):
        doc, gold = make_topic_shift_document(
            "d", n_segments=2, n_utterances=12, seed=3, vocabulary_size=7
        )
        for index, segment in enumerate(gold.segments):
            vocabulary = {f"topic{index}word{j}" for j in range(7)}
            for line_id in segment.line_ids:
                tokens = doc.utterance(line_id).text.split()
                assert len(tokens) == 7
                assert set(tokens) == vocabulary

    def test_word_order_is_shuffled(self):
        doc, _ = make_topic_shift_document("d", n_segments=1, n_utterances=30, seed=4)
        assert len({u.text for u in doc.utterances}) > 1

    def test_seeded_reproducibility(self):
        a = make_topic_shift_document("d", n_segments=3, n_utterances=20, seed=9)
        b = make_topic_shift_document("d", n_segments=3, n_utterances=20, seed=9)
        c = make_topic_shift_document("d", n_segments=3, n_utterances=20, seed=10)
        assert a == b
        assert a != c

    def test_infeasible_requests_rejected(self):
        with pytest.raises(ValueError, match="cannot host"):
            make_topic_shift_document("d", n_segments=4, n_utterances=10, seed=0)
        with pytest.raises(ValueError, match="at least one segment"):
            make_topic_shift_document("d", n_segments=0, n_utterances=10, seed=0)

    def test_single_segment_document(self):
        doc, gold = make_topic_shift_document("d", n_segments=1, n_utterances=5, seed=0)
        assert len(gold.segments) == 1
        assert validate_segmentation(doc, gold).ok


class TestTopicShiftCorpus:
    def test_ranges_and_validity(self):
        pairs = make_topic_shift_corpus(20, seed=42)
        assert len(pairs) == 20
        for doc, gold in pairs:
            assert 40 <= doc.n_utterances <= 80
            assert 2 <= len(gold.segments) <= 5
            assert validate_segmentation(doc, gold).ok

    def test_doc_ids_are_unique_and_prefixed(self):
        pairs = make_topic_shift_corpus(5, seed=1, doc_id_prefix="cal")
        ids = [doc.doc_id for doc, _ in pairs]
        assert ids == [f"cal-{i:03d}" for i in range(5)]

    def test_corpus_reproducibility(self):
        assert make_topic_shift_corpus(4, seed=7) == make_topic_shift_corpus(4, seed=7)

    def test_documents_vary_across_the_corpus(self):
        pairs = make_topic_shift_corpus(6, seed=3)
        lengths = {doc.n_utterances for doc, _ in pairs}
        assert len(lengths) > 1
