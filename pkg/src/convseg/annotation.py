"""Human annotation pass: per-line validation sheets, flag application,
adjudication, inter-annotator agreement, and silver-vs-gold change rates.

A sheet carries two binary flags per line: off_topic (this line does not
belong to its segment) and same_as_prev_segment (meaningful on the first
line of a segment: the whole segment should merge into its predecessor).
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import (
    Document,
    Segment,
    Segmentation,
    to_boundary_vector,
    validate_segmentation,
)

logger = logging.getLogger(__name__)

SHEET_COLUMNS = ("topic", "topic_same_as_prev", "line_id", "text", "speaker", "off_topic")
AGREEMENT_TASKS = ("within_segment", "cross_segment")


@dataclass(frozen=True)
class AnnotationRow:
    line_id: int
    off_topic: int = 0
    same_as_prev_segment: int = 0

    def __post_init__(self) -> None:
        if self.off_topic not in (0, 1):
            raise ValueError(f"off_topic must be 0 or 1, got {self.off_topic!r}")
        if self.same_as_prev_segment not in (0, 1):
            raise ValueError(
                f"same_as_prev_segment must be 0 or 1, got {self.same_as_prev_segment!r}"
            )


@dataclass(frozen=True)
class AnnotationSheet:
    doc_id: str
    annotator_id: str
    rows: tuple[AnnotationRow, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))
        ids = [r.line_id for r in self.rows]
        if len(set(ids)) != len(ids):
            raise ValueError(f"sheet for {self.doc_id} has duplicate line_ids")

    def line_ids(self) -> tuple[int, ...]:
        return tuple(r.line_id for r in self.rows)

    def flag(self, column: str) -> dict[int, int]:
        if column == "off_topic":
            return {r.line_id: r.off_topic for r in self.rows}
        if column == "same_as_prev_segment":
            return {r.line_id: r.same_as_prev_segment for r in self.rows}
        raise ValueError(f"unknown flag column {column!r}")


def _check_coverage(seg: Segmentation, sheet: AnnotationSheet) -> None:
    seg_ids = sorted(seg.all_line_ids())
    sheet_ids = sorted(sheet.line_ids())
    if seg_ids != sheet_ids:
        raise ValueError(
            f"sheet for {sheet.doc_id} covers different line_ids than the segmentation "
            f"(sheet has {len(sheet_ids)}, segmentation has {len(seg_ids)})"
        )


def apply_flags(silver: Segmentation, sheet: AnnotationSheet) -> Segmentation:
    """Turn validation flags into a corrected segmentation.

    Merges run first: a same_as_prev_segment=1 on a segment's first line
    folds that whole segment into its predecessor (the flag on the very
    first segment has no predecessor and is ignored with a warning). Then
    each maximal run of off_topic lines is split out of its host segment;
    host pieces keep the host topic, off-topic pieces get none.
    """
    if silver.doc_id != sheet.doc_id:
        raise ValueError(f"sheet is for {sheet.doc_id!r}, segmentation for {silver.doc_id!r}")
    _check_coverage(silver, sheet)
    same_as_prev = sheet.flag("same_as_prev_segment")
    off_topic = sheet.flag("off_topic")

    merged: list[tuple[list[int], str | None]] = []
    for index, segment in enumerate(silver.segments):
        flag = same_as_prev.get(segment.line_ids[0], 0)
        if flag == 1 and index == 0:
            logger.warning(
                "document %s: same_as_prev_segment=1 on the first segment has no "
                "predecessor to merge into; ignored",
                silver.doc_id,
            )
        if flag == 1 and merged:
            merged[-1][0].extend(segment.line_ids)
        else:
            merged.append(([*segment.line_ids], segment.topic))

    pieces: list[tuple[list[int], str | None]] = []
    for ids, topic in merged:
        run: list[int] = []
        run_off = off_topic.get(ids[0], 0)
        for line_id in ids:
            state = off_topic.get(line_id, 0)
            if run and state != run_off:
                pieces.append((run, topic if run_off == 0 else None))
                run = []
                run_off = state
            run.append(line_id)
        if run:
            pieces.append((run, topic if run_off == 0 else None))

    segments = tuple(
        Segment(split_id=i + 1, line_ids=tuple(ids), topic=topic)
        for i, (ids, topic) in enumerate(pieces)
    )
    return Segmentation(silver.doc_id, segments)


def adjudicate(
    a: AnnotationSheet, b: AnnotationSheet, adjudicator: AnnotationSheet
) -> AnnotationSheet:
    """Pointwise consensus: where a and b agree take their value, otherwise
    take the adjudicator's."""
    if not (a.doc_id == b.doc_id == adjudicator.doc_id):
        raise ValueError("all three sheets must cover the same document")
    if not (a.line_ids() == b.line_ids() == adjudicator.line_ids()):
        raise ValueError(f"sheets for {a.doc_id} cover different line_ids")
    rows = []
    for row_a, row_b, row_adj in zip(a.rows, b.rows, adjudicator.rows):
        rows.append(
            AnnotationRow(
                line_id=row_a.line_id,
                off_topic=row_a.off_topic if row_a.off_topic == row_b.off_topic else row_adj.off_topic,
                same_as_prev_segment=(
                    row_a.same_as_prev_segment
                    if row_a.same_as_prev_segment == row_b.same_as_prev_segment
                    else row_adj.same_as_prev_segment
                ),
            )
        )
    return AnnotationSheet(
        doc_id=a.doc_id,
        annotator_id=f"adjudicated({a.annotator_id},{b.annotator_id};{adjudicator.annotator_id})",
        rows=tuple(rows),
    )


@dataclass(frozen=True)
class AgreementStats:
    po: float
    kappa: float
    ac1: float
    n_items: int


def agreement_stats(
    a: AnnotationSheet, b: AnnotationSheet, task: str = "within_segment"
) -> AgreementStats:
    """Observed agreement, chance-corrected kappa, and the first-order
    chance-corrected coefficient for two annotators' binary flags.

    task 'within_segment' compares off_topic; 'cross_segment' compares
    same_as_prev_segment. kappa is reported as 0 when expected agreement is
    1 (both annotators constant); the first-order coefficient stays defined
    because its chance term never exceeds 1/2.
    """
    if task not in AGREEMENT_TASKS:
        raise ValueError(f"unknown task {task!r}; expected one of {AGREEMENT_TASKS}")
    if a.doc_id != b.doc_id:
        raise ValueError(f"sheets cover different documents: {a.doc_id!r} vs {b.doc_id!r}")
    if a.line_ids() != b.line_ids():
        raise ValueError(f"sheets for {a.doc_id} cover different line_ids")
    column = "off_topic" if task == "within_segment" else "same_as_prev_segment"
    flags_a = [getattr(r, column) for r in a.rows]
    flags_b = [getattr(r, column) for r in b.rows]
    n = len(flags_a)
    if n == 0:
        raise ValueError("cannot compute agreement over empty sheets")
    po = sum(x == y for x, y in zip(flags_a, flags_b)) / n
    p_a1 = sum(flags_a) / n
    p_b1 = sum(flags_b) / n
    pe = p_a1 * p_b1 + (1 - p_a1) * (1 - p_b1)
    kappa = 0.0 if pe == 1.0 else (po - pe) / (1 - pe)
    pi = (p_a1 + p_b1) / 2
    p_gamma = 2 * pi * (1 - pi)
    ac1 = (po - p_gamma) / (1 - p_gamma)
    return AgreementStats(po=po, kappa=kappa, ac1=ac1, n_items=n)


def change_rate(silver: Segmentation, gold: Segmentation) -> float:
    """Fraction of gap positions whose boundary bit differs between silver
    and gold over the same line ids."""
    silver_ids = sorted(silver.all_line_ids())
    gold_ids = sorted(gold.all_line_ids())
    if silver_ids != gold_ids:
        raise ValueError(
            f"silver and gold for {silver.doc_id!r} cover different line_ids"
        )
    n = len(silver_ids)
    if n < 2:
        return 0.0
    silver_bits = to_boundary_vector(silver, n).bits
    gold_bits = to_boundary_vector(gold, n).bits
    return sum(x != y for x, y in zip(silver_bits, gold_bits)) / (n - 1)


def aggregate_change_rates(
    entries: Sequence[tuple[str, Segmentation, Segmentation]]
) -> dict[str, float]:
    """Per-source and overall change rates, each as total differing gap
    positions over total gap positions for that group."""
    differing: dict[str, int] = {}
    positions: dict[str, int] = {}
    for source, silver, gold in entries:
        n = len(silver.all_line_ids())
        if n < 2:
            continue
        silver_bits = to_boundary_vector(silver, n).bits
        gold_bits = to_boundary_vector(gold, n).bits
        diff = sum(x != y for x, y in zip(silver_bits, gold_bits))
        differing[source] = differing.get(source, 0) + diff
        positions[source] = positions.get(source, 0) + (n - 1)
    out = {
        source: differing[source] / positions[source]
        for source in sorted(differing)
        if positions[source]
    }
    total_diff = sum(differing.values())
    total_pos = sum(positions.values())
    out["Overall"] = total_diff / total_pos if total_pos else 0.0
    return out


# ---------------------------------------------------------------------------
# Sheet CSV serialization


def write_annotation_sheet(
    doc: Document,
    seg: Segmentation,
    path: str | Path,
    sheet: AnnotationSheet | None = None,
) -> None:
    """Write the review table: topic and topic_same_as_prev appear on the
    first line of each segment, flags default to 0 when no sheet is given."""
    result = validate_segmentation(doc, seg)
    if not result.ok:
        raise ValueError(f"segmentation for {doc.doc_id} is invalid: {result.messages()}")
    off_topic = sheet.flag("off_topic") if sheet else {}
    same_as_prev = sheet.flag("same_as_prev_segment") if sheet else {}
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SHEET_COLUMNS)
        for segment in seg.segments:
            for position, line_id in enumerate(segment.line_ids):
                utterance = doc.utterance(line_id)
                first = position == 0
                writer.writerow(
                    [
                        (segment.topic or "") if first else "",
                        same_as_prev.get(line_id, 0) if first else "",
                        line_id,
                        utterance.text,
                        utterance.speaker,
                        off_topic.get(line_id, 0),
                    ]
                )


def read_annotation_sheet(
    path: str | Path, doc_id: str | None = None, annotator_id: str | None = None
) -> AnnotationSheet:
    """Read a review table back into a sheet. Blank flag cells count as 0."""
    path = Path(path)
    rows = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in SHEET_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        for record in reader:
            rows.append(
                AnnotationRow(
                    line_id=int(record["line_id"]),
                    off_topic=int(record["off_topic"] or 0),
                    same_as_prev_segment=int(record["topic_same_as_prev"] or 0),
                )
            )
    return AnnotationSheet(
        doc_id=doc_id if doc_id is not None else path.stem,
        annotator_id=annotator_id if annotator_id is not None else path.stem,
        rows=tuple(rows),
    )
