"""Pipeline orchestration behind the CLI: batch ingestion, splitting,
segmentation runs, corruption, SFT emission, scoring, and reporting.

Every command writes a manifest.json into its output directory with the
fully resolved configuration, the package version, and any seeds, and no
artifact embeds timestamps, so a rerun with the same inputs is byte
identical.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .annotation import agreement_stats, read_annotation_sheet
from .corpus import (
    Document,
    Segmentation,
    SOURCE_LABELS,
    SplitManifest,
    CorpusStats,
    read_corpus,
    read_segmentations,
    stats_by_source,
    stratified_split,
    validate_segmentation,
    write_corpus,
    write_segmentation,
)
from .corruption import (
    DraftBlocks,
    SpanDistribution,
    corrupt_with_doc_seed,
    corruption_rate,
    draft_blocks_from_obj,
)
from .ingest import hydrate_stubs, ingest_file, read_stub_manifest
from .metrics import ScoreReport, rank_summary, rank_summary_csv, score_documents
from .protocol import emit_sft_pairs, write_sft_records
from .segmenters import LlmSegmenter, SegmenterError, UtteranceSegmenter

logger = logging.getLogger(__name__)


def write_manifest(out_dir: Path, payload: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"toolkit_version": __version__, **payload}
    (out_dir / "manifest.json").write_text(
        json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def _params_jsonable(value):
    """get_params output -> something json.dumps accepts."""
    if isinstance(value, dict):
        return {k: _params_jsonable(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_params_jsonable(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    if hasattr(value, "__dataclass_fields__"):
        from dataclasses import asdict

        return _params_jsonable(asdict(value))
    return repr(value)


# ---------------------------------------------------------------------------
# ingest


def run_ingest(
    inputs: Sequence[str],
    out_dir: str | Path,
    fmt: str = "auto",
    manifest_path: str | None = None,
    stub_manifest: str | None = None,
    source_dir: str | None = None,
    data_source: str = "other",
    language_clue: str = "",
    genre: str = "",
) -> list[Document]:
    """Ingest raw files (or a batch/stub manifest) into a document directory."""
    docs: list[Document] = []
    if stub_manifest:
        stubs = read_stub_manifest(stub_manifest)
        docs.extend(hydrate_stubs(stubs, source_dir))
    if manifest_path:
        manifest_file = Path(manifest_path)
        entries = json.loads(manifest_file.read_text(encoding="utf-8"))
        for entry in entries:
            docs.append(
                ingest_file(
                    manifest_file.parent / entry["file"],
                    fmt=entry.get("format", "auto"),
                    doc_id=entry.get("doc_id"),
                    data_source=entry.get("data_source", "other"),
                    language_clue=entry.get("language_clue", ""),
                    genre=entry.get("genre", ""),
                    language_variant=entry.get("language_variant", "original"),
                )
            )
    for raw in inputs:
        docs.append(
            ingest_file(
                raw,
                fmt=fmt,
                data_source=data_source,
                language_clue=language_clue,
                genre=genre,
            )
        )
    if not docs:
        raise ValueError("nothing to ingest: pass input files or a manifest")
    out_dir = Path(out_dir)
    docs_dir = out_dir / "docs"
    write_corpus(docs, docs_dir)
    write_manifest(
        out_dir,
        {
            "command": "ingest",
            "documents": sorted(d.doc_id for d in docs),
            "format": fmt,
            "inputs": [str(p) for p in inputs],
            "batch_manifest": manifest_path,
            "stub_manifest": stub_manifest,
        },
    )
    return docs


# ---------------------------------------------------------------------------
# split


def run_split(
    docs_dir: str | Path,
    out_path: str | Path,
    ratios: tuple[float, float, float] = (0.70, 0.15, 0.15),
    seed: int = 0,
) -> SplitManifest:
    docs = read_corpus(docs_dir)
    manifest = stratified_split(docs, ratios=ratios, seed=seed)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(manifest.to_json(), encoding="utf-8")
    return manifest


def _select_split(
    docs: list[Document], split_path: str | None, subset: str | None
) -> list[Document]:
    if split_path is None:
        return docs
    manifest = SplitManifest.from_json(Path(split_path).read_text(encoding="utf-8"))
    wanted = set(getattr(manifest, subset or "test"))
    return [d for d in docs if d.doc_id in wanted]


# ---------------------------------------------------------------------------
# segment


def run_segment(
    docs_dir: str | Path,
    out_dir: str | Path,
    segmenters: Mapping[str, UtteranceSegmenter],
    split_path: str | None = None,
    subset: str | None = None,
    gold_dir: str | Path | None = None,
    workers: int = 1,
) -> dict[str, dict[str, Segmentation]]:
    """Run each named segmenter over the selected documents.

    When gold_dir is given, every selected document must have a gold
    segmentation before any model runs; a benchmark must fail fast, not
    after burning through half the segmenters. Documents a segmenter cannot
    handle are recorded as unscored and the run continues.
    """
    docs = _select_split(read_corpus(docs_dir), split_path, subset)
    if not docs:
        raise ValueError(f"no documents selected from {docs_dir}")
    if gold_dir is not None:
        gold = read_segmentations(gold_dir)
        missing = sorted(d.doc_id for d in docs if d.doc_id not in gold)
        if missing:
            raise ValueError(f"missing gold segmentations for: {missing}")
    out_dir = Path(out_dir)
    predictions: dict[str, dict[str, Segmentation]] = {}
    unscored: dict[str, list[dict]] = {}
    for model_name in sorted(segmenters):
        segmenter = segmenters[model_name]
        model_dir = out_dir / "predictions" / model_name
        model_dir.mkdir(parents=True, exist_ok=True)
        results: dict[str, Segmentation] = {}
        failures: list[dict] = []

        def segment_one(doc: Document) -> tuple[str, Segmentation | None, str | None]:
            try:
                return doc.doc_id, segmenter.segment(doc), None
            except SegmenterError as exc:
                return doc.doc_id, None, str(exc)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(segment_one, docs))
        else:
            outcomes = [segment_one(doc) for doc in docs]
        for doc_id, seg, error in sorted(outcomes, key=lambda t: t[0]):
            if seg is None:
                logger.warning("model %s left %s unscored: %s", model_name, doc_id, error)
                failures.append({"doc_id": doc_id, "error": error})
                continue
            results[doc_id] = seg
            write_segmentation(seg, model_dir / f"{doc_id}.json")
        predictions[model_name] = results
        unscored[model_name] = failures
        if isinstance(segmenter, LlmSegmenter) and segmenter.call_metas:
            calls_path = model_dir / "calls.jsonl"
            with calls_path.open("w", encoding="utf-8") as fh:
                for meta in sorted(segmenter.call_metas, key=lambda m: m.doc_id):
                    fh.write(json.dumps(meta.to_obj(), ensure_ascii=False) + "\n")
    write_manifest(
        out_dir,
        {
            "command": "segment",
            "documents": sorted(d.doc_id for d in docs),
            "models": {
                name: _params_jsonable(segmenters[name].get_params(deep=False))
                for name in sorted(segmenters)
            },
            "split": split_path,
            "subset": subset,
            "unscored": unscored,
            "workers": workers,
        },
    )
    return predictions


# ---------------------------------------------------------------------------
# corrupt / emit-sft


def run_corrupt(
    gold_dir: str | Path,
    out_dir: str | Path,
    seed: int = 0,
    pmf: Sequence[float] | None = None,
) -> dict[str, DraftBlocks]:
    distribution = SpanDistribution(tuple(pmf)) if pmf else SpanDistribution()
    gold = read_segmentations(gold_dir)
    if not gold:
        raise ValueError(f"no gold segmentations found in {gold_dir}")
    out_dir = Path(out_dir)
    blocks_dir = out_dir / "blocks"
    blocks_dir.mkdir(parents=True, exist_ok=True)
    rates: dict[str, float] = {}
    blocks_by_doc: dict[str, DraftBlocks] = {}
    for doc_id in sorted(gold):
        blocks = corrupt_with_doc_seed(gold[doc_id], seed, distribution)
        blocks_by_doc[doc_id] = blocks
        rates[doc_id] = corruption_rate(gold[doc_id], blocks)
        (blocks_dir / f"{doc_id}.json").write_text(blocks.to_json() + "\n", encoding="utf-8")
    write_manifest(
        out_dir,
        {
            "command": "corrupt",
            "seed": seed,
            "pmf": list(distribution.probabilities),
            "corruption_rate": {k: round(v, 6) for k, v in rates.items()},
        },
    )
    return blocks_by_doc


def read_draft_blocks(directory: str | Path) -> dict[str, DraftBlocks]:
    directory = Path(directory)
    out = {}
    for path in sorted(directory.glob("*.json")):
        items = json.loads(path.read_text(encoding="utf-8"))
        out[path.stem] = draft_blocks_from_obj(items, path.stem)
    return out


def run_emit_sft(
    docs_dir: str | Path,
    gold_dir: str | Path,
    out_dir: str | Path,
    seed: int = 0,
    pmf: Sequence[float] | None = None,
    split_path: str | None = None,
    subset: str | None = "train",
    exclude_source: str | None = None,
    out_name: str = "sft.jsonl",
) -> int:
    """Corrupt gold and emit the two-record-per-document SFT file."""
    distribution = SpanDistribution(tuple(pmf)) if pmf else SpanDistribution()
    docs = {d.doc_id: d for d in _select_split(read_corpus(docs_dir), split_path, subset)}
    gold = read_segmentations(gold_dir)
    if exclude_source:
        docs = {k: d for k, d in docs.items() if d.data_source != exclude_source}
    missing = sorted(doc_id for doc_id in docs if doc_id not in gold)
    if missing:
        raise ValueError(f"missing gold segmentations for: {missing}")
    records = []
    for doc_id in sorted(docs):
        doc = docs[doc_id]
        blocks = corrupt_with_doc_seed(gold[doc_id], seed, distribution)
        records.extend(emit_sft_pairs(doc, gold[doc_id], blocks))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    count = write_sft_records(records, out_dir / out_name)
    write_manifest(
        out_dir,
        {
            "command": "emit-sft",
            "documents": sorted(docs),
            "exclude_source": exclude_source,
            "output": out_name,
            "pmf": list(distribution.probabilities),
            "records": count,
            "seed": seed,
            "split": split_path,
            "subset": subset,
        },
    )
    return count


# ---------------------------------------------------------------------------
# score / report


def run_score(
    docs_dir: str | Path,
    gold_dir: str | Path,
    pred_dirs: Mapping[str, str | Path],
    out_dir: str | Path,
    k: int | None = None,
) -> ScoreReport:
    docs = {d.doc_id: d for d in read_corpus(docs_dir)}
    gold = read_segmentations(gold_dir)
    for doc_id, seg in gold.items():
        if doc_id in docs:
            result = validate_segmentation(docs[doc_id], seg)
            if not result.ok:
                raise ValueError(
                    f"gold for {doc_id} is invalid: {'; '.join(result.messages())}"
                )
    runs = {model: read_segmentations(path) for model, path in pred_dirs.items()}
    report = score_documents(runs, docs, gold, k=k)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out_dir / "report.txt").write_text(report.to_text_table(), encoding="utf-8")
    write_manifest(
        out_dir,
        {
            "command": "score",
            "models": sorted(pred_dirs),
            "k": k,
            "documents": {model: sorted(runs[model]) for model in sorted(runs)},
        },
    )
    return report


def run_report(
    report_path: str | Path,
    out_dir: str | Path,
    metric: str = "pk",
) -> dict:
    """Rank models per subset on one metric and emit box-plot statistics."""
    payload = json.loads(Path(report_path).read_text(encoding="utf-8"))
    table: dict[str, dict[str, float]] = {}
    for model, body in payload["models"].items():
        table[model] = {
            subset: values[metric] for subset, values in body["per_subset"].items()
        }
    from .metrics import METRIC_DIRECTIONS

    direction = METRIC_DIRECTIONS[metric]
    summaries = rank_summary(table, direction=direction)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"ranks-{metric}.csv").write_text(rank_summary_csv(summaries), encoding="utf-8")
    ranks_obj = {
        model: {
            "median": s.median,
            "q1": s.q1,
            "q3": s.q3,
            "whisker_low": s.whisker_low,
            "whisker_high": s.whisker_high,
            "ranks": list(s.ranks),
        }
        for model, s in summaries.items()
    }
    (out_dir / f"ranks-{metric}.json").write_text(
        json.dumps(ranks_obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_manifest(out_dir, {"command": "report", "metric": metric, "source": str(report_path)})
    return ranks_obj


# ---------------------------------------------------------------------------
# stats / agree / ablate


def format_stats_table(stats: Mapping[str, CorpusStats]) -> str:
    headers = (
        "Subset",
        "Samples",
        "Tokens",
        "Utterances",
        "Segments",
        "Toks/Utt",
        "Utts/Sample",
        "Segs/Sample",
    )

    def triple(avg: float, lo: int, hi: int) -> str:
        return f"{avg:.2f} ({lo}, {hi})"

    rows = []
    order = [k for k in stats if k != "Overall"] + (["Overall"] if "Overall" in stats else [])
    for name in order:
        s = stats[name]
        rows.append(
            (
                SOURCE_LABELS.get(name, name),
                str(s.samples),
                str(s.tokens_total),
                str(s.utterances_total),
                str(s.segments_total),
                triple(s.tokens_per_utterance_avg, s.tokens_per_utterance_min, s.tokens_per_utterance_max),
                triple(s.utterances_per_sample_avg, s.utterances_per_sample_min, s.utterances_per_sample_max),
                triple(s.segments_per_sample_avg, s.segments_per_sample_min, s.segments_per_sample_max),
            )
        )
    widths = [max(len(r[i]) for r in [headers, *rows]) for i in range(len(headers))]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * widths[i] for i in range(len(headers))).rstrip(),
    ]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    return "\n".join(lines) + "\n"


def run_stats(docs_dir: str | Path, gold_dir: str | Path) -> str:
    docs = {d.doc_id: d for d in read_corpus(docs_dir)}
    gold = read_segmentations(gold_dir)
    pairs = []
    for doc_id in sorted(docs):
        if doc_id not in gold:
            raise ValueError(f"missing gold segmentation for {doc_id}")
        pairs.append((docs[doc_id], gold[doc_id]))
    return format_stats_table(stats_by_source(pairs))


def run_agree(sheet_a_path: str, sheet_b_path: str, task: str) -> dict:
    sheet_a = read_annotation_sheet(sheet_a_path, doc_id="shared", annotator_id="a")
    sheet_b = read_annotation_sheet(sheet_b_path, doc_id="shared", annotator_id="b")
    stats = agreement_stats(sheet_a, sheet_b, task=task)
    return {
        "task": task,
        "po": round(stats.po, 4),
        "kappa": round(stats.kappa, 4),
        "ac1": round(stats.ac1, 4),
        "n_items": stats.n_items,
    }


def run_ablate(
    docs_dir: str | Path,
    gold_dir: str | Path,
    out_dir: str | Path,
    leave_out: Sequence[str],
    seed: int = 0,
    pmf: Sequence[float] | None = None,
    split_path: str | None = None,
    subset: str | None = "train",
) -> dict[str, int]:
    """One SFT training set per held-out source, plus the evaluation table
    scaffold whose row labels name each holdout."""
    out_dir = Path(out_dir)
    counts: dict[str, int] = {}
    rows = []
    for source in leave_out:
        if source not in SOURCE_LABELS:
            raise ValueError(f"unknown source {source!r}; expected one of {sorted(SOURCE_LABELS)}")
        label = f"w/o {SOURCE_LABELS[source]}"
        rows.append(label)
        counts[source] = run_emit_sft(
            docs_dir,
            gold_dir,
            out_dir / f"without-{source}",
            seed=seed,
            pmf=pmf,
            split_path=split_path,
            subset=subset,
            exclude_source=source,
        )
    scaffold = {"rows": rows, "columns": ["F1", "Pk", "WD"], "cells": "to be filled after training"}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ablation-table.json").write_text(
        json.dumps(scaffold, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_manifest(
        out_dir,
        {
            "command": "ablate",
            "leave_out": list(leave_out),
            "records_per_holdout": counts,
            "seed": seed,
        },
    )
    return counts
