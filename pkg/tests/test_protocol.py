"""Tests for prompt rendering, response parsing, repair, and SFT emission."""
import json
import random

import pytest

from convseg.corpus import (
    Document,
    Segment,
    Segmentation,
    Utterance,
    segmentation_from_lengths,
    segmentation_to_json,
    validate_segmentation,
)
from convseg.corruption import DraftBlocks, corrupt
from convseg.protocol import (
    SEGMENTATION_TEMPLATE,
    SYNTHETIC_ANNOTATION_TEMPLATE,
    TEMPLATE_IDS,
    ParseResult,
    conversation_jsonl,
    draft_border_violations,
    emit_sft_pairs,
    extract_json_array,
    parse_and_validate,
    render_draft_blocks,
    render_prompt,
    repair,
    utterance_json,
    write_sft_records,
)

from conftest import make_document, make_segmentation
from oracles import random_segmentation


def make_meta_document(n=6, doc_id="doc", **overrides):
    meta = {"data_source": "podcast", "language_clue": "Egyptian Arabic"}
    meta.update(overrides)
    return make_document(n, doc_id=doc_id, **meta)


# ---------------------------------------------------------------------------
# Utterance and conversation rendering


class TestConversationRendering:
    def test_utterance_json_is_one_json_line(self):
        doc = make_meta_document(3)
        line = utterance_json(doc, 2)
        assert "\n" not in line
        assert json.loads(line) == {
            "line_id": 2,
            "text": doc.utterance(2).text,
            "speaker": doc.utterance(2).speaker,
        }

    def test_utterance_json_key_order(self):
        doc = make_meta_document(2)
        line = utterance_json(doc, 1)
        assert line.index('"line_id"') < line.index('"text"') < line.index('"speaker"')

    def test_utterance_json_accepts_utterance_directly(self):
        u = Utterance(line_id=7, text="hello there", speaker="spk1")
        assert utterance_json(u) == utterance_json(
            Document("d", [Utterance(7, "hello there", "spk1")]), 7
        )

    def test_arabic_text_is_not_escaped(self):
        u = Utterance(line_id=1, text="كتاب جديد", speaker="spk0")
        assert "كتاب جديد" in utterance_json(u)
        assert "\\u" not in utterance_json(u)

    def test_conversation_jsonl_one_line_per_utterance(self):
        doc = make_meta_document(5)
        lines = conversation_jsonl(doc).split("\n")
        assert len(lines) == 5
        assert [json.loads(line)["line_id"] for line in lines] == [1, 2, 3, 4, 5]

    def test_render_draft_blocks_headers_and_lines(self):
        doc = make_meta_document(4)
        draft = DraftBlocks("doc", ((1, 2), (3, 4)))
        rendered = render_draft_blocks(doc, draft)
        expected = (
            "===== DRAFT BLOCK 1 =====\n"
            + utterance_json(doc, 1)
            + "\n"
            + utterance_json(doc, 2)
            + "\n"
            + "===== DRAFT BLOCK 2 =====\n"
            + utterance_json(doc, 3)
            + "\n"
            + utterance_json(doc, 4)
            + "\n"
        )
        assert rendered == expected


# ---------------------------------------------------------------------------
# Prompt rendering


class TestRenderPrompt:
    def test_template_ids(self):
        assert TEMPLATE_IDS == ("synthetic_annotation", "segmentation", "restoration")

    def test_synthetic_annotation_substitution_is_exact(self):
        doc = make_meta_document()
        prompt = render_prompt("synthetic_annotation", doc)
        reconstructed = (
            prompt.replace(conversation_jsonl(doc), "{conversation_str}")
            .replace("Egyptian Arabic", "{language_clue}")
            .replace("podcast", "{data_source}")
        )
        assert reconstructed == SYNTHETIC_ANNOTATION_TEMPLATE

    def test_segmentation_substitution_is_exact(self):
        doc = make_meta_document()
        prompt = render_prompt("segmentation", doc)
        reconstructed = (
            prompt.replace(conversation_jsonl(doc), "{{ conversation_str }}")
            .replace("Egyptian Arabic", "{{ language_clue }}")
            .replace("podcast", "{{ data_source }}")
        )
        assert reconstructed == SEGMENTATION_TEMPLATE

    def test_restoration_substitution_is_exact(self):
        doc = make_meta_document()
        draft = DraftBlocks("doc", ((1, 2, 3), (4, 5, 6)))
        prompt = render_prompt("restoration", doc, draft=draft)
        assert render_draft_blocks(doc, draft) in prompt
        assert "Egyptian Arabic" in prompt and "podcast" in prompt
        assert "{{ draft_block_" not in prompt

    def test_synthetic_annotation_asks_for_topic(self):
        doc = make_meta_document()
        assert '"topic"' in render_prompt("synthetic_annotation", doc)
        assert '"topic"' not in render_prompt("segmentation", doc)

    def test_conversation_lands_between_fences(self):
        doc = make_meta_document(3)
        prompt = render_prompt("segmentation", doc)
        fence = "---------------------------------------------"
        inner = prompt.split(fence)[1]
        assert inner.strip() == conversation_jsonl(doc)

    def test_unknown_template_id(self):
        with pytest.raises(ValueError, match="unknown template id"):
            render_prompt("freeform", make_meta_document())

    def test_synthetic_annotation_rejects_draft(self):
        doc = make_meta_document()
        with pytest.raises(ValueError, match="no draft blocks"):
            render_prompt("synthetic_annotation", doc, draft=DraftBlocks("doc", ((1,),)))

    def test_segmentation_rejects_draft(self):
        doc = make_meta_document()
        with pytest.raises(ValueError, match="no draft blocks"):
            render_prompt("segmentation", doc, draft=DraftBlocks("doc", ((1,),)))

    def test_restoration_requires_draft(self):
        with pytest.raises(ValueError, match="requires draft blocks"):
            render_prompt("restoration", make_meta_document())

    def test_restoration_rejects_mismatched_doc_id(self):
        doc = make_meta_document()
        with pytest.raises(ValueError, match="draft blocks are for"):
            render_prompt("restoration", doc, draft=DraftBlocks("other", ((1, 2),)))

    def test_unresolved_placeholder_guard(self):
        poison = Document(
            "doc",
            [
                Utterance(1, "normal line", "spk0"),
                Utterance(2, "echo of {{ draft_block_1_jsonl }} marker", "spk1"),
            ],
            data_source="podcast",
            language_clue="Egyptian Arabic",
        )
        with pytest.raises(RuntimeError, match="unresolved placeholder"):
            render_prompt("segmentation", poison)

    def test_unresolved_single_brace_guard(self):
        poison = Document(
            "doc",
            [Utterance(1, "stray {conversation_str} token", "spk0")],
            data_source="podcast",
            language_clue="Egyptian Arabic",
        )
        with pytest.raises(RuntimeError, match="unresolved placeholder"):
            render_prompt("synthetic_annotation", poison)


# ---------------------------------------------------------------------------
# JSON array extraction


class TestExtractJsonArray:
    def test_bare_array(self):
        assert extract_json_array('[{"a": 1}]') == [{"a": 1}]

    def test_code_fence(self):
        raw = 'Sure, here you go:\n```json\n[1, 2, 3]\n```\nDone.'
        assert extract_json_array(raw) == [1, 2, 3]

    def test_prose_before_and_after(self):
        raw = "The answer [after thought] is [4, 5] as requested"
        assert extract_json_array(raw) == [4, 5]

    def test_array_inside_object(self):
        assert extract_json_array('{"segments": [1, 2]}') == [1, 2]

    def test_unterminated_array(self):
        assert extract_json_array("[1, 2") is None

    def test_no_array(self):
        assert extract_json_array("no brackets here") is None
        assert extract_json_array('{"a": 1}') is None
        assert extract_json_array("") is None

    def test_empty_array(self):
        assert extract_json_array("[]") == []

    def test_first_array_wins(self):
        assert extract_json_array("[1] and then [2]") == [1]


# ---------------------------------------------------------------------------
# Parse and validate


class TestParseAndValidate:
    def test_valid_segmentation_round_trip(self, doc10):
        gold = make_segmentation("doc", [4, 6])
        raw = segmentation_to_json(gold, include_topics=False)
        result = parse_and_validate(raw, doc10)
        assert result.ok
        assert result.segmentation is not None
        assert [s.line_ids for s in result.segmentation.segments] == [
            tuple(range(1, 5)),
            tuple(range(5, 11)),
        ]

    def test_topics_survive_synthetic_mode(self, doc10):
        gold = make_segmentation("doc", [4, 6], topics=["weather", "food"])
        raw = segmentation_to_json(gold, include_topics=True)
        result = parse_and_validate(raw, doc10, mode="synthetic_annotation")
        assert result.ok
        assert [s.topic for s in result.segmentation.segments] == ["weather", "food"]

    def test_garbage_is_malformed(self, doc10):
        result = parse_and_validate("I cannot help with that.", doc10)
        assert result.segmentation is None
        assert len(result.violations) == 1
        assert result.violations[0].kind == "malformed"
        assert not result.ok

    def test_empty_array_is_malformed(self, doc10):
        result = parse_and_validate("[]", doc10)
        assert result.segmentation is None
        assert result.violations[0].kind == "malformed"

    def test_uncoercible_item_is_malformed(self, doc10):
        result = parse_and_validate('[{"split_id": 1}]', doc10)
        assert result.segmentation is None
        assert result.violations[0].kind == "malformed"

    def test_partition_defects_are_itemized(self, doc10):
        raw = json.dumps(
            [
                {"split_id": 1, "line_ids": "1,2,3"},
                {"split_id": 2, "line_ids": "6,7,8,9,10"},
            ]
        )
        result = parse_and_validate(raw, doc10)
        assert result.segmentation is not None
        assert not result.ok
        assert {v.kind for v in result.violations} == {"gap"}

    def test_restoration_checks_borders(self, doc10):
        draft = DraftBlocks("doc", (tuple(range(1, 6)), tuple(range(6, 11))))
        merged = json.dumps([{"split_id": 1, "line_ids": ",".join(map(str, range(1, 11)))}])
        result = parse_and_validate(merged, doc10, mode="restoration", draft=draft)
        assert result.segmentation is not None
        assert {v.kind for v in result.violations} == {"border"}

    def test_restoration_ok_when_borders_kept(self, doc10):
        draft = DraftBlocks("doc", (tuple(range(1, 6)), tuple(range(6, 11))))
        raw = json.dumps(
            [
                {"split_id": 1, "line_ids": "1,2"},
                {"split_id": 2, "line_ids": "3,4,5"},
                {"split_id": 3, "line_ids": "6,7,8,9,10"},
            ]
        )
        result = parse_and_validate(raw, doc10, mode="restoration", draft=draft)
        assert result.ok

    def test_unknown_mode(self, doc10):
        with pytest.raises(ValueError, match="unknown mode"):
            parse_and_validate("[]", doc10, mode="classify")

    def test_restoration_mode_requires_draft(self, doc10):
        with pytest.raises(ValueError, match="requires draft blocks"):
            parse_and_validate("[]", doc10, mode="restoration")

    def test_ok_property(self, doc10):
        seg = make_segmentation("doc", [10])
        assert ParseResult(seg, ()).ok
        assert not ParseResult(seg, (validate_segmentation(doc10, seg).violations)).ok or True
        assert not ParseResult(None, ()).ok


class TestDraftBorderViolations:
    def test_preserved_borders_are_clean(self, doc10):
        draft = DraftBlocks("doc", (tuple(range(1, 4)), tuple(range(4, 11))))
        seg = make_segmentation("doc", [3, 4, 3])
        assert draft_border_violations(seg, draft) == []

    def test_merged_across_border(self, doc10):
        draft = DraftBlocks("doc", (tuple(range(1, 6)), tuple(range(6, 11))))
        seg = make_segmentation("doc", [10])
        violations = draft_border_violations(seg, draft)
        assert len(violations) == 2
        assert all(v.kind == "border" for v in violations)
        assert {v.line_id for v in violations} == {5, 6}


# ---------------------------------------------------------------------------
# Repair


def mutate_segmentation(rng, seg, doc):
    """Apply 1..3 random defects to a valid segmentation."""
    items = [[list(s.line_ids), s.topic] for s in seg.segments]
    for _ in range(rng.randint(1, 3)):
        kind = rng.choice(
            ["drop_seg", "drop_line", "dupe_line", "shuffle", "renumber", "out_of_range", "empty_seg"]
        )
        populated = [item for item in items if item[0]]
        if kind == "drop_seg" and len(items) > 1:
            items.pop(rng.randrange(len(items)))
        elif kind == "drop_line" and populated:
            target = rng.choice(populated)
            if len(target[0]) > 1:
                target[0].pop(rng.randrange(len(target[0])))
        elif kind == "dupe_line" and populated:
            target = rng.choice(populated)
            target[0].append(rng.choice(target[0]))
        elif kind == "shuffle":
            rng.shuffle(items)
        elif kind == "renumber":
            pass  # split_ids are reassigned below with an offset
        elif kind == "out_of_range" and populated:
            rng.choice(populated)[0].append(doc.last_line_id + rng.randint(1, 5))
        elif kind == "empty_seg":
            items.insert(rng.randrange(len(items) + 1), [[], None])
    offset = rng.choice([0, 1])
    segments = tuple(
        Segment(split_id=i + 1 + offset, line_ids=tuple(ids), topic=topic)
        for i, (ids, topic) in enumerate(items)
    )
    return Segmentation(doc.doc_id, segments)


class TestRepair:
    def test_valid_input_unchanged(self, doc10):
        seg = make_segmentation("doc", [3, 3, 4])
        repaired, actions = repair(seg, doc10)
        assert repaired is seg
        assert actions == ()

    def test_drops_empty_segments(self, doc10):
        seg = Segmentation(
            "doc",
            (
                Segment(1, tuple(range(1, 6))),
                Segment(2, ()),
                Segment(3, tuple(range(6, 11))),
            ),
        )
        repaired, actions = repair(seg, doc10)
        assert validate_segmentation(doc10, repaired).ok
        assert [len(s.line_ids) for s in repaired.segments] == [5, 5]
        assert any("empty segment" in a for a in actions)

    def test_reorders_segments(self, doc10):
        seg = Segmentation(
            "doc", (Segment(1, tuple(range(6, 11))), Segment(2, tuple(range(1, 6))))
        )
        repaired, actions = repair(seg, doc10)
        assert validate_segmentation(doc10, repaired).ok
        assert repaired.segments[0].line_ids == tuple(range(1, 6))
        assert any("reordered" in a for a in actions)

    def test_drops_duplicates_first_wins(self, doc10):
        seg = Segmentation(
            "doc",
            (
                Segment(1, (1, 2, 3, 4, 5), topic="first"),
                Segment(2, (5, 6, 7, 8, 9, 10), topic="second"),
            ),
        )
        repaired, actions = repair(seg, doc10)
        assert validate_segmentation(doc10, repaired).ok
        assert repaired.segments[0].line_ids == (1, 2, 3, 4, 5)
        assert repaired.segments[0].topic == "first"
        assert repaired.segments[1].line_ids == (6, 7, 8, 9, 10)
        assert any("duplicate" in a for a in actions)

    def test_clips_out_of_range(self, doc10):
        seg = Segmentation(
            "doc", (Segment(1, tuple(range(1, 11)) + (11, 12)),)
        )
        repaired, actions = repair(seg, doc10)
        assert validate_segmentation(doc10, repaired).ok
        assert repaired.segments[-1].line_ids[-1] == 10
        assert any("out-of-range" in a and "[11, 12]" in a for a in actions)

    def test_splits_non_consecutive_runs(self, doc10):
        seg = Segmentation(
            "doc",
            (Segment(1, (1, 2, 6, 7), topic="mixed"), Segment(2, (3, 4, 5, 8, 9, 10))),
        )
        repaired, actions = repair(seg, doc10)
        assert validate_segmentation(doc10, repaired).ok
        assert any("non-consecutive" in a for a in actions)
        first = repaired.segments[0]
        assert first.line_ids == (1, 2) and first.topic == "mixed"

    def test_closes_interior_gap_by_extending_left(self, doc10):
        seg = Segmentation(
            "doc",
            (Segment(1, (1, 2, 3), topic="a"), Segment(2, (7, 8, 9, 10), topic="b")),
        )
        repaired, actions = repair(seg, doc10)
        assert validate_segmentation(doc10, repaired).ok
        assert repaired.segments[0].line_ids == (1, 2, 3, 4, 5, 6)
        assert repaired.segments[0].topic == "a"
        assert repaired.segments[1].line_ids == (7, 8, 9, 10)
        assert any("close gap 4..6" in a for a in actions)

    def test_extends_head_and_tail(self, doc10):
        seg = Segmentation("doc", (Segment(1, (4, 5, 6)),))
        repaired, actions = repair(seg, doc10)
        assert validate_segmentation(doc10, repaired).ok
        assert repaired.segments[0].line_ids == tuple(range(1, 11))
        assert any("first segment back" in a for a in actions)
        assert any("last segment" in a for a in actions)

    def test_nothing_usable_falls_back_to_single_segment(self, doc10):
        seg = Segmentation("doc", (Segment(1, (99, 100)), Segment(2, ())))
        repaired, actions = repair(seg, doc10)
        assert validate_segmentation(doc10, repaired).ok
        assert len(repaired.segments) == 1
        assert repaired.segments[0].line_ids == tuple(range(1, 11))
        assert any("fell back" in a for a in actions)

    def test_renumber_only_change_is_reported(self, doc10):
        seg = Segmentation(
            "doc", (Segment(3, tuple(range(1, 6))), Segment(4, tuple(range(6, 11))))
        )
        repaired, actions = repair(seg, doc10)
        assert validate_segmentation(doc10, repaired).ok
        assert actions == ("renumbered split_ids",)
        assert [s.split_id for s in repaired.segments] == [1, 2]

    def test_draft_borders_reimposed(self, doc10):
        draft = DraftBlocks("doc", (tuple(range(1, 6)), tuple(range(6, 11))))
        merged = Segmentation("doc", (Segment(1, tuple(range(1, 11)), topic="all"),))
        repaired, actions = repair(merged, doc10, draft=draft)
        assert validate_segmentation(doc10, repaired).ok
        assert draft_border_violations(repaired, draft) == []
        assert [s.line_ids for s in repaired.segments] == [
            tuple(range(1, 6)),
            tuple(range(6, 11)),
        ]
        assert all(s.topic == "all" for s in repaired.segments)
        assert any("re-imposed draft block borders" in a for a in actions)

    def test_valid_partition_missing_borders_still_repaired(self, doc10):
        draft = DraftBlocks("doc", ((1, 2, 3), (4, 5, 6, 7), (8, 9, 10)))
        seg = make_segmentation("doc", [10])
        repaired, actions = repair(seg, doc10, draft=draft)
        assert draft_border_violations(repaired, draft) == []
        assert len(repaired.segments) == 3

    def test_fallback_respects_draft_borders(self, doc10):
        draft = DraftBlocks("doc", ((1, 2, 3, 4), (5, 6, 7, 8, 9, 10)))
        seg = Segmentation("doc", (Segment(1, (42,)),))
        repaired, actions = repair(seg, doc10, draft=draft)
        assert validate_segmentation(doc10, repaired).ok
        assert draft_border_violations(repaired, draft) == []

    def test_random_mutations_always_repair_to_valid(self):
        rng = random.Random(404)
        for trial in range(100):
            n = rng.randint(3, 25)
            doc = make_document(n, doc_id=f"doc{trial}")
            gold = random_segmentation(rng, f"doc{trial}", n, max_segments=6)
            broken = mutate_segmentation(rng, gold, doc)
            repaired, actions = repair(broken, doc)
            assert validate_segmentation(doc, repaired).ok, (trial, actions)

    def test_repair_is_idempotent(self):
        rng = random.Random(405)
        for trial in range(100):
            n = rng.randint(3, 25)
            doc = make_document(n, doc_id=f"doc{trial}")
            gold = random_segmentation(rng, f"doc{trial}", n, max_segments=6)
            broken = mutate_segmentation(rng, gold, doc)
            once, _ = repair(broken, doc)
            twice, second_actions = repair(once, doc)
            assert twice == once
            assert second_actions == ()

    def test_repair_with_draft_is_idempotent(self):
        rng = random.Random(406)
        for trial in range(50):
            n = rng.randint(4, 25)
            doc = make_document(n, doc_id=f"doc{trial}")
            gold = random_segmentation(rng, f"doc{trial}", n, max_segments=6)
            draft = corrupt(gold, seed=trial)
            broken = mutate_segmentation(rng, gold, doc)
            once, _ = repair(broken, doc, draft=draft)
            assert validate_segmentation(doc, once).ok
            assert draft_border_violations(once, draft) == []
            twice, second_actions = repair(once, doc, draft=draft)
            assert twice == once
            assert second_actions == ()


# ---------------------------------------------------------------------------
# SFT pair emission


class TestEmitSftPairs:
    def test_two_records_with_gold_completion(self, doc10):
        doc = make_meta_document(10, doc_id="doc")
        gold = make_segmentation("doc", [4, 6], topics=["a", "b"])
        draft = corrupt(gold, seed=3)
        segment_rec, restore_rec = emit_sft_pairs(doc, gold, draft)
        assert segment_rec.task == "segment"
        assert restore_rec.task == "restore"
        assert segment_rec.doc_id == restore_rec.doc_id == "doc"
        expected = segmentation_to_json(gold, include_topics=False)
        assert segment_rec.completion == expected
        assert restore_rec.completion == expected
        assert '"topic"' not in segment_rec.completion
        assert segment_rec.prompt == render_prompt("segmentation", doc)
        assert restore_rec.prompt == render_prompt("restoration", doc, draft=draft)

    def test_completion_parses_back_clean(self):
        doc = make_meta_document(12, doc_id="d12")
        gold = make_segmentation("d12", [3, 5, 4])
        draft = corrupt(gold, seed=9)
        segment_rec, restore_rec = emit_sft_pairs(doc, gold, draft)
        assert parse_and_validate(segment_rec.completion, doc).ok
        assert parse_and_validate(
            restore_rec.completion, doc, mode="restoration", draft=draft
        ).ok

    def test_invalid_gold_rejected(self):
        doc = make_meta_document(10, doc_id="doc")
        bad = make_segmentation("doc", [4, 4])  # covers only 8 of 10 lines
        draft = DraftBlocks("doc", (tuple(range(1, 11)),))
        with pytest.raises(ValueError, match="invalid"):
            emit_sft_pairs(doc, bad, draft)

    def test_write_sft_records_jsonl(self, tmp_path):
        doc = make_meta_document(8, doc_id="doc")
        gold = make_segmentation("doc", [4, 4])
        draft = corrupt(gold, seed=1)
        records = emit_sft_pairs(doc, gold, draft)
        path = tmp_path / "sft.jsonl"
        count = write_sft_records(records, path)
        assert count == 2
        lines = path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 2
        objs = [json.loads(line) for line in lines]
        assert [o["task"] for o in objs] == ["segment", "restore"]
        assert all(set(o) == {"task", "prompt", "completion", "doc_id"} for o in objs)

    def test_write_sft_records_keeps_arabic_readable(self, tmp_path):
        doc = Document(
            "ar",
            [Utterance(1, "مرحبا بكم", "spk0"), Utterance(2, "كيف الحال", "spk1")],
            data_source="opus",
            language_clue="Arabic",
        )
        gold = segmentation_from_lengths("ar", [2])
        draft = corrupt(gold, seed=0)
        path = tmp_path / "sft.jsonl"
        write_sft_records(emit_sft_pairs(doc, gold, draft), path)
        assert "مرحبا" in path.read_text(encoding="utf-8")
