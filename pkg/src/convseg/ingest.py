"""Source ingestion: turn raw transcript or prose files into documents.

Transcripts keep one utterance per line with an optional "Speaker:" prefix
and optional source line numbering (preserved as provenance). Prose is split
into sentences, each wrapped as an utterance with a sentinel speaker.
Restricted-corpus stubs carry references only; their text is hydrated from a
user-supplied local directory.
"""
from __future__ import annotations

import json
import logging
import re
from pathlib import Path
from typing import Sequence

from .corpus import Document, Utterance

logger = logging.getLogger(__name__)

PROSE_SPEAKER = "text"
FORMATS = ("transcript", "prose", "auto")

# Terminal sentence punctuation: Latin plus Arabic question mark and full stop.
_TERMINALS = ".!?؟۔"
_SENTENCE_END = re.compile(rf"[{_TERMINALS}]+[\"'»”’)\]]*\s+")

# Abbreviations that end with '.' but do not end a sentence.
ABBREVIATIONS = {
    "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "vs.", "etc.", "e.g.", "i.e.",
    "no.", "fig.", "al.", "jr.", "sr.", "inc.", "ltd.", "co.", "dept.",
}

_SPEAKER_PREFIX = re.compile(r"^\s*([^:\n]{1,40}?)\s*:\s+(\S.*)$")
_NUMBER_PREFIX = re.compile(r"^\s*(\d+)[.)\t:]\s+(\S.*)$")


class IngestError(ValueError):
    """Raised when a source file cannot be mapped onto the document model."""


def split_sentences(text: str) -> list[str]:
    """Rule-based sentence splitting on terminal punctuation with an
    abbreviation guard (known abbreviations, single-letter initials, and
    decimal numbers do not split)."""
    sentences: list[str] = []
    start = 0
    for match in _SENTENCE_END.finditer(text):
        candidate_end = match.end()
        before = text[start : match.start() + 1]
        last_token = before.strip().split()[-1].lower() if before.strip() else ""
        if last_token in ABBREVIATIONS:
            continue
        # Single-letter initial like "J." in "J. Smith".
        if re.fullmatch(r"[^\W\d_]\.", last_token):
            continue
        # Decimal number like "3.14" continuing after the dot.
        tail = text[match.start() : candidate_end]
        if tail[0] == "." and match.start() > 0 and text[match.start() - 1].isdigit():
            rest = text[candidate_end : candidate_end + 1]
            if rest.isdigit():
                continue
        sentence = text[start : match.start() + len(tail.rstrip())].strip()
        if sentence:
            sentences.append(sentence)
        start = candidate_end
    remainder = text[start:].strip()
    if remainder:
        sentences.append(remainder)
    return sentences


def _looks_like_transcript(lines: Sequence[str]) -> bool:
    nonblank = [line for line in lines if line.strip()]
    if not nonblank:
        return False
    with_speaker = sum(1 for line in nonblank if _SPEAKER_PREFIX.match(line))
    return with_speaker >= max(1, len(nonblank) // 2)


def parse_transcript(text: str) -> tuple[list[tuple[str, str]], list[int] | None]:
    """(speaker, text) per utterance plus original numbering when present."""
    utterances: list[tuple[str, str]] = []
    original_ids: list[int] = []
    any_numbered = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        number_match = _NUMBER_PREFIX.match(line)
        if number_match:
            any_numbered = True
            original_ids.append(int(number_match.group(1)))
            line = number_match.group(2)
        else:
            original_ids.append(-1)
        speaker_match = _SPEAKER_PREFIX.match(line)
        if speaker_match:
            utterances.append((speaker_match.group(1).strip(), speaker_match.group(2).strip()))
        else:
            utterances.append(("unknown", line))
    return utterances, (original_ids if any_numbered else None)


def ingest_text(
    text: str,
    doc_id: str,
    fmt: str = "auto",
    data_source: str = "other",
    language_clue: str = "",
    genre: str = "",
    language_variant: str = "original",
) -> Document:
    """Build a document from raw text. Line ids always start at 1; source
    numbering, when detected in a transcript, lands in original_line_ids."""
    if fmt not in FORMATS:
        raise IngestError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    lines = text.splitlines()
    if fmt == "auto":
        fmt = "transcript" if _looks_like_transcript(lines) or _is_line_per_utterance(lines) else "prose"

    if fmt == "transcript":
        pairs, original_ids = parse_transcript(text)
        if not pairs:
            sample = [line for line in lines if line.strip()][:3]
            raise IngestError(
                f"{doc_id}: no utterances found in transcript input; first lines: {sample!r}"
            )
        utterances = tuple(
            Utterance(line_id=i + 1, text=utterance_text, speaker=speaker)
            for i, (speaker, utterance_text) in enumerate(pairs)
        )
        original = tuple(original_ids) if original_ids is not None else None
    else:
        sentences = split_sentences(" ".join(line.strip() for line in lines if line.strip()))
        if not sentences:
            raise IngestError(f"{doc_id}: no sentences found in prose input")
        utterances = tuple(
            Utterance(line_id=i + 1, text=sentence, speaker=PROSE_SPEAKER)
            for i, sentence in enumerate(sentences)
        )
        original = None
    return Document(
        doc_id=doc_id,
        utterances=utterances,
        data_source=data_source,
        language_clue=language_clue,
        genre=genre,
        language_variant=language_variant,
        original_line_ids=original,
    )


def _is_line_per_utterance(lines: Sequence[str]) -> bool:
    """Short newline-separated lines with no blank-line paragraphs read as a
    plain utterance-per-line transcript."""
    nonblank = [line for line in lines if line.strip()]
    if len(nonblank) < 2:
        return False
    blank_separated = sum(1 for line in lines if not line.strip())
    mean_length = sum(len(line) for line in nonblank) / len(nonblank)
    return blank_separated <= len(lines) // 4 and mean_length < 200


def ingest_file(
    path: str | Path,
    fmt: str = "auto",
    doc_id: str | None = None,
    data_source: str = "other",
    language_clue: str = "",
    genre: str = "",
    language_variant: str = "original",
) -> Document:
    path = Path(path)
    if not path.exists():
        raise IngestError(f"input file not found: {path}")
    return ingest_text(
        path.read_text(encoding="utf-8"),
        doc_id=doc_id if doc_id is not None else path.stem,
        fmt=fmt,
        data_source=data_source,
        language_clue=language_clue,
        genre=genre,
        language_variant=language_variant,
    )


# ---------------------------------------------------------------------------
# Restricted-corpus stubs


def read_stub_manifest(path: str | Path) -> list[dict]:
    """A stub manifest is a JSON array of references:
    {"doc_id", "file", "language_clue"?, "genre"?, "format"?}. No text."""
    path = Path(path)
    if not path.exists():
        raise IngestError(f"stub manifest not found: {path}")
    stubs = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(stubs, list):
        raise IngestError(f"{path}: stub manifest must be a JSON array")
    for index, stub in enumerate(stubs):
        if not isinstance(stub, dict) or "doc_id" not in stub or "file" not in stub:
            raise IngestError(f"{path}: stub {index} needs 'doc_id' and 'file' fields")
    return stubs


def hydrate_stubs(
    stubs: Sequence[dict], source_dir: str | Path | None, data_source: str = "ldc"
) -> list[Document]:
    """Load the referenced transcript files from a user-supplied local
    directory. A missing directory or file is a hard error naming the path;
    the toolkit never bundles restricted text."""
    if source_dir is None:
        raise IngestError(
            "these documents are reference stubs; pass the local directory that "
            "holds the licensed source files"
        )
    source_dir = Path(source_dir)
    if not source_dir.is_dir():
        raise IngestError(f"licensed source directory not found: {source_dir}")
    docs = []
    for stub in stubs:
        file_path = source_dir / stub["file"]
        if not file_path.exists():
            raise IngestError(f"stub {stub['doc_id']!r}: source file not found: {file_path}")
        docs.append(
            ingest_file(
                file_path,
                fmt=stub.get("format", "auto"),
                doc_id=stub["doc_id"],
                data_source=data_source,
                language_clue=stub.get("language_clue", ""),
                genre=stub.get("genre", ""),
            )
        )
    return docs
