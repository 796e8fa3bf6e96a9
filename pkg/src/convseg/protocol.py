"""Prompted-segmentation protocol: prompt rendering, response parsing and
validation, deterministic repair, and SFT pair emission.

Three prompt templates are supported: synthetic annotation (topic field
included), plain segmentation, and boundary restoration over draft blocks.
Rendering is exact string substitution; the templates contain literal braces
of their own, so no general-purpose formatter is involved.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .corpus import (
    Document,
    Segment,
    Segmentation,
    Violation,
    coerce_segment_item,
    segmentation_from_lengths,
    segmentation_to_json,
    validate_segmentation,
)
from .corruption import DraftBlocks

SYNTHETIC_ANNOTATION_TEMPLATE = r"""Split the conversation ({data_source}) in {language_clue} into sequential segments,
where each segment contains lines that discuss the same topic.

The conversation is given as JSONL, one utterance per line, and each line has a unique
integer line_id. Your task is to output ONLY a JSON array of segment objects with
the following structure:

[
  {
    "split_id": "sequential integer starting from 1",
    "topic": "precise topic description in Modern Standard Arabic (max 10 words)",
    "line_ids": "comma-separated list of line_ids in order (e.g., \"1,2,3\")"
  }
]

SEGMENTATION RULES:
1) A new segment starts only when there is a clear topic shift
   (change of main subject, task, or goal).
2) Do NOT start a new segment for:
   - simple speaker changes,
   - backchannels or short clarifications,
   - minor digressions that stay within the same overall topic.
3) Segments must be contiguous in terms of line_ids: no overlaps, no gaps.
   Within each segment, line_ids must be consecutive (e.g., "1,2,3" is valid;
   "1,3,4" is invalid).

COVERAGE RULES (MUST hold for the entire document):
1) The first segment must start at the smallest line_id in the conversation.
2) Each next segment must start at the line_id immediately following the last
   line_id of the previous segment.
3) Every line_id in the input must appear exactly once in exactly one segment.

TOPIC FIELD:
- Write "topic" in clear, concise Modern Standard Arabic.
- Describe what is actually discussed in the segment, not the speaker or style.
- Do NOT invent content that is not supported by the lines.

IMPORTANT:
- Output MUST be valid JSON.
- Do NOT include any explanation, comments, or text outside the JSON array.

Conversation in {language_clue}:
---------------------------------------------
{conversation_str}
---------------------------------------------"""

SEGMENTATION_TEMPLATE = r"""Split the conversation ({{ data_source }}) in {{ language_clue }} into sequential segments,
where each segment contains lines that discuss the same topic.

The conversation is given as JSONL, one utterance per line, and each line has a unique
integer line_id. Your task is to output ONLY a JSON array of segment objects with
the following structure:

[
  {
    "split_id": "sequential integer starting from 1",
    "line_ids": "comma-separated list of line_ids in order (e.g., \"1,2,3\")"
  },
  ...
]

SEGMENTATION RULES:
1) A new segment starts only when there is a clear topic shift
   (change of main subject, task, or goal).
2) Do NOT start a new segment for:
   - simple speaker changes,
   - backchannels or short clarifications,
   - minor digressions that stay within the same overall topic.
3) Segments must be contiguous in terms of line_ids: no overlaps, no gaps.
   Within each segment, line_ids must be consecutive (e.g., "1,2,3" is valid;
   "1,3,4" is invalid).

COVERAGE RULES (MUST hold for the entire document):
1) The first segment must start at the smallest line_id in the conversation.
2) Each next segment must start at the line_id immediately following the last
   line_id of the previous segment.
3) Every line_id in the input must appear exactly once in exactly one segment.


IMPORTANT:
- Output MUST be valid JSON.
- Do NOT include any explanation, comments, or text outside the JSON array.

Conversation in {{ language_clue }}:
---------------------------------------------
{{ conversation_str }}
---------------------------------------------
"""

RESTORATION_TEMPLATE = r"""Restore missing segment boundaries inside each DRAFT BLOCK for

{{ data_source }} ({{ language_clue }}).

You are given a conversation as JSONL utterances, grouped into DRAFT BLOCKS.
Each utterance has a unique integer "line_id".
DRAFT BLOCK outer borders are correct, but some internal segment borders may be missing.
Your job is to produce the FINAL segmentation by ADDING missing borders ONLY.

IMPORTANT RESTRICTION:
- You may ONLY split INSIDE a single block.
- You MUST NOT merge or move lines across blocks.
- Every block border must remain a segment border in the final output:
  • the first line_id of each block MUST be the first line_id of some output segment,
  • the last line_id of each block MUST be the last line_id of some output segment.

OUTPUT (ONLY):
Return ONLY a valid JSON array. Each element is a segment object with:
- "split_id": sequential integer starting from 1
- "line_ids": a comma-separated string of line_ids in increasing order

Example output format (note: JSON array, no extra text):
[
  {"split_id": 1, "line_ids": "2,3"},
  {"split_id": 2, "line_ids": "4,5,6,7"}
]

SEGMENTATION RULES:
1) Start a new segment ONLY when there is a clear topic shift
   (change of main subject / goal / task).
2) Do NOT start a new segment for:
   - speaker changes,
   - backchannels,
   - short clarifications,
   - minor digressions that stay within the same overall topic.

SEQUENTIAL LINE_ID RULE (MUST HOLD FOR EVERY SEGMENT):
- Within each segment, "line_ids" MUST be a sequence of consecutive integers (step = 1).
  Examples:
  - Valid:  "4,5,6,7"
  - Invalid: "4,6,7"  (missing 5)
  - Invalid: "7,6,5"  (not increasing)

COVERAGE RULES (MUST HOLD FOR THE ENTIRE RESPONSE):
1) ALL input line_ids across ALL blocks MUST be covered.
2) Each line_id MUST appear exactly once in exactly one output segment.
3) No gaps and no overlaps:
   - The first output segment MUST start with the smallest line_id in DRAFT BLOCK 1.
   - The last output segment MUST end with the largest line_id in DRAFT BLOCK N.
   - Across the entire output, segments must connect end-to-start:
     if one segment ends at line_id X, the next segment MUST start at line_id X+1.

FINAL CHECK BEFORE YOU OUTPUT:
- Do your segments cover every line_id shown in the blocks exactly once?
- Are line_ids consecutive within each segment?
- Did you preserve every DRAFT BLOCK border?

Blocks (each line is an utterance JSON object):
===== DRAFT BLOCK 1 =====
{{ draft_block_1_jsonl }}
===== DRAFT BLOCK 2 =====
{{ draft_block_2_jsonl }}
...
===== DRAFT BLOCK N =====
{{ draft_block_n_jsonl }}
"""

_BLOCKS_REGION = """===== DRAFT BLOCK 1 =====
{{ draft_block_1_jsonl }}
===== DRAFT BLOCK 2 =====
{{ draft_block_2_jsonl }}
...
===== DRAFT BLOCK N =====
{{ draft_block_n_jsonl }}
"""

TEMPLATE_IDS = ("synthetic_annotation", "segmentation", "restoration")

_UNRESOLVED_TOKENS = (
    "{data_source}",
    "{language_clue}",
    "{conversation_str}",
    "{{ data_source }}",
    "{{ language_clue }}",
    "{{ conversation_str }}",
    "{{ draft_block_",
)


def utterance_json(doc_or_utterance, line_id: int | None = None) -> str:
    """One utterance as a single JSON line with line_id, text, speaker."""
    utterance = (
        doc_or_utterance.utterance(line_id) if line_id is not None else doc_or_utterance
    )
    return json.dumps(
        {"line_id": utterance.line_id, "text": utterance.text, "speaker": utterance.speaker},
        ensure_ascii=False,
    )


def conversation_jsonl(doc: Document) -> str:
    return "\n".join(utterance_json(u) for u in doc.utterances)


def render_draft_blocks(doc: Document, draft: DraftBlocks) -> str:
    parts: list[str] = []
    for number, block in enumerate(draft.blocks, start=1):
        parts.append(f"===== DRAFT BLOCK {number} =====")
        parts.extend(utterance_json(doc, line_id) for line_id in block)
    return "\n".join(parts) + "\n"


def render_prompt(
    template_id: str, doc: Document, draft: DraftBlocks | None = None
) -> str:
    """Instantiate a template for one document. Substitution is exact: the
    output differs from the template only at the placeholder sites."""
    if template_id == "synthetic_annotation":
        if draft is not None:
            raise ValueError("synthetic_annotation takes no draft blocks")
        prompt = (
            SYNTHETIC_ANNOTATION_TEMPLATE.replace("{data_source}", doc.data_source)
            .replace("{language_clue}", doc.language_clue)
            .replace("{conversation_str}", conversation_jsonl(doc))
        )
    elif template_id == "segmentation":
        if draft is not None:
            raise ValueError("segmentation takes no draft blocks")
        prompt = (
            SEGMENTATION_TEMPLATE.replace("{{ data_source }}", doc.data_source)
            .replace("{{ language_clue }}", doc.language_clue)
            .replace("{{ conversation_str }}", conversation_jsonl(doc))
        )
    elif template_id == "restoration":
        if draft is None:
            raise ValueError("restoration requires draft blocks")
        if draft.doc_id != doc.doc_id:
            raise ValueError(
                f"draft blocks are for {draft.doc_id!r}, document is {doc.doc_id!r}"
            )
        prompt = (
            RESTORATION_TEMPLATE.replace("{{ data_source }}", doc.data_source)
            .replace("{{ language_clue }}", doc.language_clue)
            .replace(_BLOCKS_REGION, render_draft_blocks(doc, draft))
        )
    else:
        raise ValueError(f"unknown template id {template_id!r}; expected one of {TEMPLATE_IDS}")
    for token in _UNRESOLVED_TOKENS:
        if token in prompt:
            raise RuntimeError(f"unresolved placeholder {token!r} left in rendered prompt")
    return prompt


# ---------------------------------------------------------------------------
# Parsing and validation


@dataclass(frozen=True)
class ParseResult:
    """Outcome of parsing one model response."""

    segmentation: Segmentation | None
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return self.segmentation is not None and not self.violations


def extract_json_array(raw: str) -> list | None:
    """First JSON array in the text, tolerating code fences and prose."""
    decoder = json.JSONDecoder()
    search_from = 0
    while True:
        start = raw.find("[", search_from)
        if start == -1:
            return None
        try:
            value, _end = decoder.raw_decode(raw, start)
        except ValueError:
            search_from = start + 1
            continue
        if isinstance(value, list):
            return value
        search_from = start + 1


def draft_border_violations(seg: Segmentation, draft: DraftBlocks) -> list[Violation]:
    """Every block's first line must start a segment and every block's last
    line must end one."""
    starts = {segment.line_ids[0] for segment in seg.segments if segment.line_ids}
    ends = {segment.line_ids[-1] for segment in seg.segments if segment.line_ids}
    violations = []
    for number, block in enumerate(draft.blocks, start=1):
        if block[0] not in starts:
            violations.append(
                Violation(
                    "border",
                    f"draft block {number} border not preserved: no segment starts at "
                    f"line_id {block[0]}",
                    line_id=block[0],
                )
            )
        if block[-1] not in ends:
            violations.append(
                Violation(
                    "border",
                    f"draft block {number} border not preserved: no segment ends at "
                    f"line_id {block[-1]}",
                    line_id=block[-1],
                )
            )
    return violations


def parse_and_validate(
    raw: str,
    doc: Document,
    mode: str = "segmentation",
    draft: DraftBlocks | None = None,
) -> ParseResult:
    """Parse a model response into a Segmentation and collect violations.

    Unparseable responses yield segmentation=None with a 'malformed'
    violation. Parseable responses always yield the segmentation as written,
    with every partition violation itemized; restoration mode additionally
    checks that draft-block borders survive.
    """
    if mode not in ("segmentation", "synthetic_annotation", "restoration"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "restoration" and draft is None:
        raise ValueError("restoration mode requires draft blocks")
    items = extract_json_array(raw)
    if items is None:
        return ParseResult(
            None, (Violation("malformed", "no JSON array found in response"),)
        )
    if not items:
        return ParseResult(None, (Violation("malformed", "response JSON array is empty"),))
    segments = []
    for index, item in enumerate(items):
        try:
            segments.append(coerce_segment_item(item, index))
        except ValueError as exc:
            return ParseResult(None, (Violation("malformed", str(exc)),))
    seg = Segmentation(doc_id=doc.doc_id, segments=tuple(segments))
    violations = list(validate_segmentation(doc, seg).violations)
    if mode == "restoration" and draft is not None:
        violations.extend(draft_border_violations(seg, draft))
    return ParseResult(seg, tuple(violations))


# ---------------------------------------------------------------------------
# Deterministic repair


def repair(
    raw_seg: Segmentation, doc: Document, draft: DraftBlocks | None = None
) -> tuple[Segmentation, tuple[str, ...]]:
    """Normalize a defective segmentation into a valid one.

    Steps: drop empty segments, sort by first line id, drop duplicate ids
    (first occurrence wins), clip out-of-range ids, break non-consecutive
    segments into runs, close gaps by extending the preceding segment (the
    first segment absorbs a leading gap, the last a trailing one), renumber
    split ids. If draft blocks are given their borders are re-imposed by
    splitting. Valid input comes back unchanged; the result always validates,
    and repairing twice equals repairing once.
    """
    actions: list[str] = []
    before = validate_segmentation(doc, raw_seg)
    if before.ok and (draft is None or not draft_border_violations(raw_seg, draft)):
        return raw_seg, ()

    working = [s for s in raw_seg.segments if s.line_ids]
    if len(working) < len(raw_seg.segments):
        actions.append(f"dropped {len(raw_seg.segments) - len(working)} empty segment(s)")
    ordered = sorted(working, key=lambda s: s.line_ids[0])
    if ordered != working:
        actions.append("reordered segments by first line_id")

    doc_ids = set(doc.line_ids)
    seen: set[int] = set()
    cleaned: list[tuple[list[int], str | None]] = []
    dropped_duplicates: list[int] = []
    dropped_range: list[int] = []
    for segment in ordered:
        kept: list[int] = []
        for line_id in segment.line_ids:
            if line_id not in doc_ids:
                dropped_range.append(line_id)
            elif line_id in seen:
                dropped_duplicates.append(line_id)
            else:
                seen.add(line_id)
                kept.append(line_id)
        if kept:
            cleaned.append((sorted(kept), segment.topic))
    if dropped_range:
        actions.append(f"clipped out-of-range line_ids {sorted(set(dropped_range))}")
    if dropped_duplicates:
        actions.append(f"dropped duplicate line_ids {sorted(set(dropped_duplicates))}")

    if not cleaned:
        actions.append("no usable segments: fell back to a single whole-document segment")
        fallback = segmentation_from_lengths(
            doc.doc_id, [doc.n_utterances], first_line_id=doc.first_line_id
        )
        if draft is not None:
            fallback = _split_at_borders(fallback, draft, actions)
        return fallback, tuple(actions)

    runs: list[tuple[list[int], str | None]] = []
    split_any = False
    for ids, topic in cleaned:
        run = [ids[0]]
        for line_id in ids[1:]:
            if line_id == run[-1] + 1:
                run.append(line_id)
            else:
                runs.append((run, topic))
                run = [line_id]
                split_any = True
        runs.append((run, topic))
    if split_any:
        actions.append("split non-consecutive segments into consecutive runs")
    runs.sort(key=lambda item: item[0][0])

    first_ids, first_topic = runs[0]
    if first_ids[0] > doc.first_line_id:
        actions.append(
            f"extended first segment back to cover {doc.first_line_id}..{first_ids[0] - 1}"
        )
        runs[0] = (list(range(doc.first_line_id, first_ids[0])) + first_ids, first_topic)
    for index in range(len(runs) - 1):
        ids, topic = runs[index]
        next_start = runs[index + 1][0][0]
        if ids[-1] + 1 < next_start:
            actions.append(
                f"extended segment ending at {ids[-1]} to close gap {ids[-1] + 1}..{next_start - 1}"
            )
            runs[index] = (ids + list(range(ids[-1] + 1, next_start)), topic)
    last_ids, last_topic = runs[-1]
    if last_ids[-1] < doc.last_line_id:
        actions.append(
            f"extended last segment to cover {last_ids[-1] + 1}..{doc.last_line_id}"
        )
        runs[-1] = (last_ids + list(range(last_ids[-1] + 1, doc.last_line_id + 1)), last_topic)

    segments = tuple(
        Segment(split_id=i + 1, line_ids=tuple(ids), topic=topic)
        for i, (ids, topic) in enumerate(runs)
    )
    repaired = Segmentation(doc.doc_id, segments)
    if draft is not None:
        repaired = _split_at_borders(repaired, draft, actions)
    if not actions and repaired != raw_seg:
        actions.append("renumbered split_ids")
    return repaired, tuple(actions)


def _split_at_borders(
    seg: Segmentation, draft: DraftBlocks, actions: list[str]
) -> Segmentation:
    """Split segments so every draft-block border is a segment border."""
    cut_after = {block[-1] for block in draft.blocks[:-1]}
    segments: list[Segment] = []
    split_any = False
    for segment in seg.segments:
        run: list[int] = []
        for line_id in segment.line_ids:
            run.append(line_id)
            if line_id in cut_after and line_id != segment.line_ids[-1]:
                segments.append(Segment(len(segments) + 1, tuple(run), segment.topic))
                run = []
                split_any = True
        if run:
            segments.append(Segment(len(segments) + 1, tuple(run), segment.topic))
    if split_any:
        actions.append("re-imposed draft block borders by splitting")
    return Segmentation(seg.doc_id, tuple(segments))


# ---------------------------------------------------------------------------
# SFT pair emission


@dataclass(frozen=True)
class SftRecord:
    task: str  # "segment" or "restore"
    prompt: str
    completion: str
    doc_id: str

    def to_obj(self) -> dict:
        return {
            "task": self.task,
            "prompt": self.prompt,
            "completion": self.completion,
            "doc_id": self.doc_id,
        }


def emit_sft_pairs(
    doc: Document, gold: Segmentation, draft: DraftBlocks
) -> tuple[SftRecord, SftRecord]:
    """Two training records per document: segment from scratch, and restore
    boundaries inside the corrupted draft blocks. Completions are the gold
    answer in the output schema the prompts ask for."""
    result = validate_segmentation(doc, gold)
    if not result.ok:
        raise ValueError(f"gold for {doc.doc_id} is invalid: {'; '.join(result.messages())}")
    completion = segmentation_to_json(gold, include_topics=False)
    segment_record = SftRecord(
        task="segment",
        prompt=render_prompt("segmentation", doc),
        completion=completion,
        doc_id=doc.doc_id,
    )
    restore_record = SftRecord(
        task="restore",
        prompt=render_prompt("restoration", doc, draft=draft),
        completion=completion,
        doc_id=doc.doc_id,
    )
    return segment_record, restore_record


def write_sft_records(records: Iterable[SftRecord], path: str | Path) -> int:
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_obj(), ensure_ascii=False) + "\n")
            count += 1
    return count
