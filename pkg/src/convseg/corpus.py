"""Conversational document model: utterances, segmentations, boundary views,
validation, serialization, corpus statistics, and stratified splitting.

A document is an ordered list of utterances with consecutive integer line ids.
A segmentation partitions those line ids into contiguous segments with no gaps
and no overlaps. The boundary-vector view encodes the same partition as one
bit per gap between adjacent utterances.
"""
from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)

DATA_SOURCES = ("opus", "rewayat", "mgb5", "ldc", "podcast", "other")
LANGUAGE_VARIANTS = ("original", "mt_en", "mt_msa")

# Labels used in human-facing tables and ablation row names.
SOURCE_LABELS = {
    "opus": "OPUS",
    "rewayat": "Rewayat",
    "mgb5": "MGB-5",
    "ldc": "LDC",
    "podcast": "Podcasts",
    "other": "Other",
}


@dataclass(frozen=True)
class Utterance:
    """One conversation turn (or one prose sentence wrapped as a turn)."""

    line_id: int
    text: str
    speaker: str = "unknown"

    def __post_init__(self) -> None:
        if not isinstance(self.line_id, int) or self.line_id < 1:
            raise ValueError(f"line_id must be an integer >= 1, got {self.line_id!r}")
        if not self.text.strip():
            raise ValueError(f"utterance text must be non-empty (line_id={self.line_id})")
        if not self.speaker:
            raise ValueError(f"speaker must be non-empty (line_id={self.line_id})")


@dataclass(frozen=True)
class Document:
    """An ordered conversation with source metadata.

    line_ids must be consecutive (step 1) starting at the document's smallest
    id, which must be >= 1. Ingestion normally renumbers from 1 and keeps any
    source numbering in original_line_ids.
    """

    doc_id: str
    utterances: tuple[Utterance, ...]
    data_source: str = "other"
    language_clue: str = ""
    genre: str = ""
    language_variant: str = "original"
    original_line_ids: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        object.__setattr__(self, "utterances", tuple(self.utterances))
        if not self.utterances:
            raise ValueError(f"document {self.doc_id} has no utterances")
        ids = [u.line_id for u in self.utterances]
        for prev, cur in zip(ids, ids[1:]):
            if cur != prev + 1:
                raise ValueError(
                    f"document {self.doc_id}: line_ids must be consecutive, "
                    f"got {prev} followed by {cur}"
                )
        if self.data_source not in DATA_SOURCES:
            raise ValueError(
                f"document {self.doc_id}: unknown data_source {self.data_source!r}, "
                f"expected one of {DATA_SOURCES}"
            )
        if self.language_variant not in LANGUAGE_VARIANTS:
            raise ValueError(
                f"document {self.doc_id}: unknown language_variant {self.language_variant!r}, "
                f"expected one of {LANGUAGE_VARIANTS}"
            )
        if self.original_line_ids is not None:
            object.__setattr__(self, "original_line_ids", tuple(self.original_line_ids))
            if len(self.original_line_ids) != len(self.utterances):
                raise ValueError(
                    f"document {self.doc_id}: original_line_ids length "
                    f"{len(self.original_line_ids)} != utterance count {len(self.utterances)}"
                )

    @property
    def n_utterances(self) -> int:
        return len(self.utterances)

    @property
    def first_line_id(self) -> int:
        return self.utterances[0].line_id

    @property
    def last_line_id(self) -> int:
        return self.utterances[-1].line_id

    @property
    def line_ids(self) -> tuple[int, ...]:
        return tuple(u.line_id for u in self.utterances)

    def utterance(self, line_id: int) -> Utterance:
        offset = line_id - self.first_line_id
        if offset < 0 or offset >= self.n_utterances:
            raise KeyError(f"document {self.doc_id} has no line_id {line_id}")
        return self.utterances[offset]

    def texts(self) -> list[str]:
        return [u.text for u in self.utterances]


@dataclass(frozen=True)
class Segment:
    """A contiguous run of line ids sharing one topic.

    Deliberately permissive at construction time: parser output and other
    untrusted segmentations must be representable so validate_segmentation can
    report their defects instead of the constructor throwing.
    """

    split_id: int
    line_ids: tuple[int, ...]
    topic: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "line_ids", tuple(int(i) for i in self.line_ids))

    @property
    def first(self) -> int:
        return self.line_ids[0]

    @property
    def last(self) -> int:
        return self.line_ids[-1]

    def is_consecutive(self) -> bool:
        return all(b == a + 1 for a, b in zip(self.line_ids, self.line_ids[1:]))


@dataclass(frozen=True)
class Segmentation:
    """An ordered list of segments over one document."""

    doc_id: str
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    def all_line_ids(self) -> list[int]:
        return [i for seg in self.segments for i in seg.line_ids]

    def segment_lengths(self) -> tuple[int, ...]:
        return tuple(len(seg.line_ids) for seg in self.segments)

    def boundary_line_ids(self) -> tuple[int, ...]:
        """Line ids that close a segment, excluding the final one."""
        return tuple(seg.line_ids[-1] for seg in self.segments[:-1])


@dataclass(frozen=True)
class BoundaryVector:
    """Gap view of a segmentation: bit j is True iff a segment ends after the
    (j+1)-th utterance. Length is n_utterances - 1."""

    n_utterances: int
    bits: tuple[bool, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bits", tuple(bool(b) for b in self.bits))
        if self.n_utterances < 1:
            raise ValueError("boundary vector needs at least one utterance")
        if len(self.bits) != self.n_utterances - 1:
            raise ValueError(
                f"boundary vector for {self.n_utterances} utterances needs "
                f"{self.n_utterances - 1} bits, got {len(self.bits)}"
            )

    @property
    def segment_count(self) -> int:
        return 1 + sum(self.bits)

    def as_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)


@dataclass(frozen=True)
class Violation:
    """One structural defect found in a segmentation."""

    kind: str
    message: str
    line_id: int | None = None
    segment_index: int | None = None

    def __str__(self) -> str:
        return self.message


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    violations: tuple[Violation, ...] = ()

    def messages(self) -> list[str]:
        return [v.message for v in self.violations]


def validate_segmentation(doc: Document, seg: Segmentation) -> ValidationResult:
    """Check every partition invariant of seg against doc's line_id range.

    Returns OK or the full list of violations (gaps, overlaps, duplicates,
    non-consecutive segments, out-of-range ids, empty or misnumbered
    segments). Malformed input yields verdicts rather than exceptions; only a
    doc_id mismatch (caller error) raises.
    """
    if seg.doc_id != doc.doc_id:
        raise ValueError(f"segmentation is for {seg.doc_id!r}, document is {doc.doc_id!r}")

    violations: list[Violation] = []
    if not seg.segments:
        return ValidationResult(False, (Violation("empty", "segmentation has no segments"),))

    doc_ids = set(doc.line_ids)
    seen: set[int] = set()
    for idx, segment in enumerate(seg.segments):
        if segment.split_id != idx + 1:
            violations.append(
                Violation(
                    "split_id",
                    f"segment at position {idx + 1} has split_id {segment.split_id}, expected {idx + 1}",
                    segment_index=idx,
                )
            )
        if not segment.line_ids:
            violations.append(
                Violation("empty_segment", f"segment {idx + 1} has no line_ids", segment_index=idx)
            )
            continue
        if not segment.is_consecutive():
            violations.append(
                Violation(
                    "non_consecutive",
                    f"segment {idx + 1} line_ids are not consecutive: {list(segment.line_ids)}",
                    segment_index=idx,
                )
            )
        for line_id in segment.line_ids:
            if line_id not in doc_ids:
                violations.append(
                    Violation(
                        "out_of_range",
                        f"line_id {line_id} in segment {idx + 1} is outside the document range "
                        f"{doc.first_line_id}..{doc.last_line_id}",
                        line_id=line_id,
                        segment_index=idx,
                    )
                )
            elif line_id in seen:
                violations.append(
                    Violation(
                        "duplicate",
                        f"line_id {line_id} appears more than once (again in segment {idx + 1})",
                        line_id=line_id,
                        segment_index=idx,
                    )
                )
            seen.add(line_id)

    # Coverage and chaining over the in-range ids actually used.
    nonempty = [s for s in seg.segments if s.line_ids]
    if nonempty:
        first = nonempty[0]
        if first.first != doc.first_line_id and doc.first_line_id not in seen:
            missing_end = min(first.first - 1, doc.last_line_id)
            violations.append(
                Violation(
                    "gap",
                    f"gap at {_span_str(doc.first_line_id, missing_end)}: first segment starts at "
                    f"{first.first}, document starts at {doc.first_line_id}",
                    line_id=doc.first_line_id,
                )
            )
        for prev, nxt in zip(nonempty, nonempty[1:]):
            if nxt.first == prev.last + 1:
                continue
            if nxt.first > prev.last + 1:
                violations.append(
                    Violation(
                        "gap",
                        f"gap at {_span_str(prev.last + 1, nxt.first - 1)}: segment ending at "
                        f"{prev.last} is followed by segment starting at {nxt.first}",
                        line_id=prev.last + 1,
                    )
                )
            else:
                violations.append(
                    Violation(
                        "overlap",
                        f"segment starting at {nxt.first} overlaps segment ending at {prev.last}",
                        line_id=nxt.first,
                    )
                )
        last = nonempty[-1]
        if last.last != doc.last_line_id and doc.last_line_id not in seen:
            violations.append(
                Violation(
                    "gap",
                    f"gap at {_span_str(min(last.last + 1, doc.last_line_id), doc.last_line_id)}: "
                    f"last segment ends at {last.last}, document ends at {doc.last_line_id}",
                    line_id=doc.last_line_id,
                )
            )

    return ValidationResult(not violations, tuple(violations))


def _span_str(first: int, last: int) -> str:
    return str(first) if first == last else f"{first}..{last}"


def to_boundary_vector(seg: Segmentation, n_utterances: int) -> BoundaryVector:
    """Collapse a valid segmentation to its gap-bit view.

    Only segment lengths matter, so this works for documents whose line ids
    start anywhere. Rejects segmentations that are not a clean partition of
    n_utterances consecutive ids.
    """
    ids = seg.all_line_ids()
    if len(ids) != n_utterances or any(b != a + 1 for a, b in zip(ids, ids[1:])):
        raise ValueError(
            f"segmentation for {seg.doc_id!r} is not a valid partition of "
            f"{n_utterances} consecutive utterances"
        )
    bits = [False] * (n_utterances - 1)
    position = 0
    for segment in seg.segments[:-1]:
        position += len(segment.line_ids)
        bits[position - 1] = True
    return BoundaryVector(n_utterances, tuple(bits))


def from_boundary_vector(
    bv: BoundaryVector, doc_id: str, first_line_id: int = 1
) -> Segmentation:
    """Expand a gap-bit view into an explicit segmentation (topics unset)."""
    lengths: list[int] = []
    run = 1
    for bit in bv.bits:
        if bit:
            lengths.append(run)
            run = 1
        else:
            run += 1
    lengths.append(run)
    return segmentation_from_lengths(doc_id, lengths, first_line_id=first_line_id)


def segmentation_from_lengths(
    doc_id: str,
    lengths: Sequence[int],
    first_line_id: int = 1,
    topics: Sequence[str | None] | None = None,
) -> Segmentation:
    if topics is not None and len(topics) != len(lengths):
        raise ValueError("topics must align with lengths")
    segments = []
    start = first_line_id
    for idx, length in enumerate(lengths):
        if length < 1:
            raise ValueError(f"segment lengths must be >= 1, got {length}")
        topic = topics[idx] if topics is not None else None
        segments.append(Segment(idx + 1, tuple(range(start, start + length)), topic))
        start += length
    return Segmentation(doc_id, tuple(segments))


def boundary_vector_for(doc: Document, seg: Segmentation) -> BoundaryVector:
    return to_boundary_vector(seg, doc.n_utterances)


# ---------------------------------------------------------------------------
# Tokenization and corpus statistics


def tokenize(text: str) -> list[str]:
    """Counting tokenizer: split on whitespace runs."""
    return text.split()


@dataclass(frozen=True)
class CorpusStats:
    """Descriptive statistics over (document, segmentation) pairs.

    Averages are total-based (total / total, rounded to 2 decimals); min and
    max are per-utterance for tokens and per-document for the other two.
    """

    samples: int
    tokens_total: int
    utterances_total: int
    segments_total: int
    tokens_per_utterance_avg: float
    tokens_per_utterance_min: int
    tokens_per_utterance_max: int
    utterances_per_sample_avg: float
    utterances_per_sample_min: int
    utterances_per_sample_max: int
    segments_per_sample_avg: float
    segments_per_sample_min: int
    segments_per_sample_max: int


def compute_stats(pairs: Sequence[tuple[Document, Segmentation]]) -> CorpusStats:
    if not pairs:
        raise ValueError("cannot compute statistics over an empty corpus")
    tokens_per_utt: list[int] = []
    utts_per_doc: list[int] = []
    segs_per_doc: list[int] = []
    for doc, seg in pairs:
        result = validate_segmentation(doc, seg)
        if not result.ok:
            raise ValueError(
                f"invalid segmentation for {doc.doc_id}: {'; '.join(result.messages())}"
            )
        tokens_per_utt.extend(len(tokenize(u.text)) for u in doc.utterances)
        utts_per_doc.append(doc.n_utterances)
        segs_per_doc.append(seg.n_segments)
    tokens_total = sum(tokens_per_utt)
    utterances_total = sum(utts_per_doc)
    segments_total = sum(segs_per_doc)
    samples = len(pairs)
    return CorpusStats(
        samples=samples,
        tokens_total=tokens_total,
        utterances_total=utterances_total,
        segments_total=segments_total,
        tokens_per_utterance_avg=round(tokens_total / utterances_total, 2),
        tokens_per_utterance_min=min(tokens_per_utt),
        tokens_per_utterance_max=max(tokens_per_utt),
        utterances_per_sample_avg=round(utterances_total / samples, 2),
        utterances_per_sample_min=min(utts_per_doc),
        utterances_per_sample_max=max(utts_per_doc),
        segments_per_sample_avg=round(segments_total / samples, 2),
        segments_per_sample_min=min(segs_per_doc),
        segments_per_sample_max=max(segs_per_doc),
    )


def stats_by_source(
    pairs: Sequence[tuple[Document, Segmentation]]
) -> dict[str, CorpusStats]:
    """Per data_source statistics plus an 'Overall' row over the pool."""
    by_source: dict[str, list[tuple[Document, Segmentation]]] = {}
    for doc, seg in pairs:
        by_source.setdefault(doc.data_source, []).append((doc, seg))
    out = {source: compute_stats(group) for source, group in sorted(by_source.items())}
    out["Overall"] = compute_stats(pairs)
    return out


# ---------------------------------------------------------------------------
# Stratified splitting


@dataclass(frozen=True)
class SplitManifest:
    train: tuple[str, ...]
    valid: tuple[str, ...]
    test: tuple[str, ...]
    seed: int
    ratios: tuple[float, float, float]
    warnings: tuple[str, ...] = ()

    def split_of(self, doc_id: str) -> str:
        for name in ("train", "valid", "test"):
            if doc_id in getattr(self, name):
                return name
        raise KeyError(f"doc_id {doc_id!r} is not in any split")

    def to_json(self) -> str:
        payload = {
            "splits": {"train": list(self.train), "valid": list(self.valid), "test": list(self.test)},
            "seed": self.seed,
            "ratios": list(self.ratios),
            "warnings": list(self.warnings),
        }
        return json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "SplitManifest":
        payload = json.loads(text)
        splits = payload["splits"]
        return SplitManifest(
            train=tuple(splits["train"]),
            valid=tuple(splits["valid"]),
            test=tuple(splits["test"]),
            seed=int(payload["seed"]),
            ratios=tuple(float(r) for r in payload["ratios"]),
            warnings=tuple(payload.get("warnings", [])),
        )


def derive_seed(base_seed: int, *parts: str) -> int:
    """Stable per-key sub-seed; hash() is salted per process so it cannot be
    used here."""
    digest = hashlib.sha256(("|".join([str(base_seed), *parts])).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _apportion(count: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment; ties go to the earlier split."""
    exact = [count * r for r in ratios]
    floors = [int(x) for x in exact]
    remainder = count - sum(floors)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - floors[i]), i))
    for i in order[:remainder]:
        floors[i] += 1
    return floors


def stratified_split(
    docs: Sequence[Document],
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
    seed: int = 0,
) -> SplitManifest:
    """Split documents into train/valid/test, stratified by
    (language_clue, genre).

    Within each stratum the doc ids are shuffled with a seed derived from
    (seed, stratum) and sliced by largest-remainder counts. Strata with fewer
    than 3 documents go entirely to train, with a warning recorded in the
    manifest.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three non-negative fractions summing to 1, got {ratios}")
    ids = [doc.doc_id for doc in docs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate doc_ids in corpus")

    strata: dict[tuple[str, str], list[str]] = {}
    for doc in docs:
        strata.setdefault((doc.language_clue, doc.genre), []).append(doc.doc_id)

    train: list[str] = []
    valid: list[str] = []
    test: list[str] = []
    warnings: list[str] = []
    for key in sorted(strata):
        members = sorted(strata[key])
        if len(members) < 3:
            warnings.append(
                f"stratum (language_clue={key[0]!r}, genre={key[1]!r}) has "
                f"{len(members)} document(s) (< 3): assigned entirely to train"
            )
            train.extend(members)
            continue
        rng = random.Random(derive_seed(seed, key[0], key[1]))
        rng.shuffle(members)
        n_train, n_valid, n_test = _apportion(len(members), ratios)
        train.extend(members[:n_train])
        valid.extend(members[n_train : n_train + n_valid])
        test.extend(members[n_train + n_valid :])
    for warning in warnings:
        logger.warning(warning)
    return SplitManifest(
        train=tuple(sorted(train)),
        valid=tuple(sorted(valid)),
        test=tuple(sorted(test)),
        seed=seed,
        ratios=tuple(ratios),
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# Serialization


def document_to_jsonl(doc: Document) -> str:
    lines = [
        json.dumps(
            {"line_id": u.line_id, "text": u.text, "speaker": u.speaker},
            ensure_ascii=False,
        )
        for u in doc.utterances
    ]
    return "\n".join(lines) + "\n"


def document_metadata(doc: Document) -> dict:
    meta = {
        "doc_id": doc.doc_id,
        "data_source": doc.data_source,
        "language_clue": doc.language_clue,
        "genre": doc.genre,
        "language_variant": doc.language_variant,
    }
    if doc.original_line_ids is not None:
        meta["original_line_ids"] = list(doc.original_line_ids)
    return meta


def write_document(doc: Document, path: str | Path) -> None:
    """Write <doc>.jsonl (one utterance per line) plus a .meta.json sidecar."""
    path = Path(path)
    path.write_text(document_to_jsonl(doc), encoding="utf-8")
    sidecar = path.with_suffix(".meta.json")
    sidecar.write_text(
        json.dumps(document_metadata(doc), ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def read_document(path: str | Path) -> Document:
    path = Path(path)
    utterances = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
        utterances.append(
            Utterance(
                line_id=int(obj["line_id"]),
                text=str(obj["text"]),
                speaker=str(obj.get("speaker", "unknown")),
            )
        )
    sidecar = path.with_suffix(".meta.json")
    meta: dict = {}
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
    original = meta.get("original_line_ids")
    return Document(
        doc_id=meta.get("doc_id", path.stem),
        utterances=tuple(utterances),
        data_source=meta.get("data_source", "other"),
        language_clue=meta.get("language_clue", ""),
        genre=meta.get("genre", ""),
        language_variant=meta.get("language_variant", "original"),
        original_line_ids=tuple(original) if original is not None else None,
    )


def write_corpus(docs: Iterable[Document], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for doc in docs:
        path = directory / f"{doc.doc_id}.jsonl"
        write_document(doc, path)
        paths.append(path)
    return paths


def read_corpus(directory: str | Path) -> list[Document]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"corpus directory not found: {directory}")
    return [read_document(p) for p in sorted(directory.glob("*.jsonl"))]


def segment_to_obj(segment: Segment, include_topic: bool = True) -> dict:
    obj: dict = {"split_id": segment.split_id}
    if include_topic and segment.topic is not None:
        obj["topic"] = segment.topic
    obj["line_ids"] = ",".join(str(i) for i in segment.line_ids)
    return obj


def segmentation_to_obj(seg: Segmentation, include_topics: bool = True) -> list[dict]:
    return [segment_to_obj(s, include_topic=include_topics) for s in seg.segments]


def segmentation_to_json(seg: Segmentation, include_topics: bool = True) -> str:
    """Serialize as a JSON array of {"split_id", "topic"?, "line_ids"} objects
    with line_ids as a comma-separated string."""
    return json.dumps(segmentation_to_obj(seg, include_topics=include_topics), ensure_ascii=False)


def coerce_segment_item(item: object, index: int) -> Segment:
    """Map one parsed JSON element to a Segment, tolerating the common
    variants (line_ids as string or list, split_id as digit string)."""
    if not isinstance(item, dict):
        raise ValueError(f"segment {index + 1} is not an object: {item!r}")
    if "line_ids" not in item:
        raise ValueError(f"segment {index + 1} is missing 'line_ids'")
    raw_ids = item["line_ids"]
    if isinstance(raw_ids, str):
        parts = [p.strip() for p in raw_ids.split(",") if p.strip()]
        try:
            line_ids = tuple(int(p) for p in parts)
        except ValueError as exc:
            raise ValueError(f"segment {index + 1} has non-integer line_ids: {raw_ids!r}") from exc
    elif isinstance(raw_ids, list):
        try:
            line_ids = tuple(int(p) for p in raw_ids)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"segment {index + 1} has non-integer line_ids: {raw_ids!r}") from exc
    elif isinstance(raw_ids, int):
        line_ids = (raw_ids,)
    else:
        raise ValueError(f"segment {index + 1} has unusable line_ids: {raw_ids!r}")
    raw_split = item.get("split_id", index + 1)
    try:
        split_id = int(raw_split)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"segment {index + 1} has non-integer split_id: {raw_split!r}") from exc
    topic = item.get("topic")
    if topic is not None:
        topic = str(topic)
    return Segment(split_id=split_id, line_ids=line_ids, topic=topic)


def segmentation_from_obj(items: Sequence[object], doc_id: str) -> Segmentation:
    segments = tuple(coerce_segment_item(item, i) for i, item in enumerate(items))
    return Segmentation(doc_id=doc_id, segments=segments)


def write_segmentation(seg: Segmentation, path: str | Path, include_topics: bool = True) -> None:
    Path(path).write_text(
        json.dumps(
            segmentation_to_obj(seg, include_topics=include_topics),
            ensure_ascii=False,
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )


def read_segmentation(path: str | Path, doc_id: str | None = None) -> Segmentation:
    path = Path(path)
    items = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(items, list):
        raise ValueError(f"{path}: expected a JSON array of segments")
    return segmentation_from_obj(items, doc_id if doc_id is not None else path.stem)


def read_segmentations(directory: str | Path) -> dict[str, Segmentation]:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"segmentation directory not found: {directory}")
    return {p.stem: read_segmentation(p) for p in sorted(directory.glob("*.json"))}
