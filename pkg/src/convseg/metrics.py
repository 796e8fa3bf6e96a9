"""Segmentation quality metrics and benchmark aggregation.

All pairwise metrics consume the boundary-vector view of a reference and a
hypothesis segmentation over the same number of utterances. Lower is better
for pk and window_diff; higher is better for boundary_f1_macro and
topic_accuracy.
"""
from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, asdict
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .corpus import BoundaryVector, Document, Segmentation, boundary_vector_for

logger = logging.getLogger(__name__)


def _check_pair(ref: BoundaryVector, hyp: BoundaryVector) -> None:
    if ref.n_utterances != hyp.n_utterances:
        raise ValueError(
            f"reference covers {ref.n_utterances} utterances, hypothesis "
            f"{hyp.n_utterances}; they must match"
        )


def default_k(ref: BoundaryVector) -> int:
    """Probe width: half the mean reference segment length, floored at 2."""
    return max(2, round(ref.n_utterances / (2 * ref.segment_count)))


def _segment_indices(bv: BoundaryVector) -> np.ndarray:
    """Segment index per utterance (0-based)."""
    bits = np.asarray(bv.bits, dtype=np.int64)
    out = np.zeros(bv.n_utterances, dtype=np.int64)
    if bits.size:
        out[1:] = np.cumsum(bits)
    return out


def pk(ref: BoundaryVector, hyp: BoundaryVector, k: int | None = None) -> float:
    """Probability that a probe pair of utterances k apart is classified
    differently (same segment vs different segments) by ref and hyp.

    Probes run i = 1 .. n-k over utterance pairs (i, i+k). When n <= k there
    are no probes: returns 0.0 for identical boundary vectors, else 1.0, with
    a warning.
    """
    _check_pair(ref, hyp)
    if k is None:
        k = default_k(ref)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = ref.n_utterances
    if n <= k:
        logger.warning(
            "pk is undefined for n=%d <= k=%d; returning the degenerate 0/1 score", n, k
        )
        return 0.0 if ref.bits == hyp.bits else 1.0
    ref_idx = _segment_indices(ref)
    hyp_idx = _segment_indices(hyp)
    ref_same = ref_idx[:-k] == ref_idx[k:]
    hyp_same = hyp_idx[:-k] == hyp_idx[k:]
    return float(np.mean(ref_same != hyp_same))


def window_diff(ref: BoundaryVector, hyp: BoundaryVector, k: int | None = None) -> float:
    """Fraction of k-wide windows in which ref and hyp contain a different
    number of boundaries. Window i spans utterances i..i+k, i = 1..n-k, and
    counts the boundaries at gaps i..i+k-1.
    """
    _check_pair(ref, hyp)
    if k is None:
        k = default_k(ref)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = ref.n_utterances
    if n <= k:
        logger.warning(
            "window_diff is undefined for n=%d <= k=%d; returning the degenerate 0/1 score",
            n,
            k,
        )
        return 0.0 if ref.bits == hyp.bits else 1.0
    ref_bits = np.asarray(ref.bits, dtype=np.int64)
    hyp_bits = np.asarray(hyp.bits, dtype=np.int64)
    # Cumulative boundary counts; window i covers gap indices [i-1, i+k-1) 0-based.
    ref_cum = np.concatenate(([0], np.cumsum(ref_bits)))
    hyp_cum = np.concatenate(([0], np.cumsum(hyp_bits)))
    starts = np.arange(0, n - k)
    ref_counts = ref_cum[starts + k] - ref_cum[starts]
    hyp_counts = hyp_cum[starts + k] - hyp_cum[starts]
    return float(np.mean(ref_counts != hyp_counts))


def boundary_f1_macro(ref: BoundaryVector, hyp: BoundaryVector) -> float:
    """Unweighted mean of the F1 for the boundary class and the F1 for the
    non-boundary class over the n-1 gap positions.

    Conventions: zero-division F1 is 0; a class absent from both ref and hyp
    scores 1 for that class.
    """
    _check_pair(ref, hyp)
    ref_bits = np.asarray(ref.bits, dtype=bool)
    hyp_bits = np.asarray(hyp.bits, dtype=bool)
    if ref_bits.size == 0:
        raise ValueError("boundary_f1_macro needs at least one gap (n >= 2)")
    scores = []
    for positive in (True, False):
        r = ref_bits == positive
        h = hyp_bits == positive
        if not r.any() and not h.any():
            scores.append(1.0)
            continue
        tp = float(np.sum(r & h))
        denom = float(np.sum(r) + np.sum(h))
        scores.append(2.0 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def topic_accuracy(
    ref: Segmentation, hyp: Segmentation, alignment: str = "optimal"
) -> float:
    """Fraction of utterances whose hypothesis segment is aligned to their
    reference segment under a one-to-one segment alignment.

    alignment='optimal' maximizes total overlap (assignment problem);
    alignment='greedy' repeatedly takes the largest remaining overlap cell.
    """
    ref_ids = ref.all_line_ids()
    hyp_ids = hyp.all_line_ids()
    if sorted(ref_ids) != sorted(hyp_ids):
        raise ValueError(
            f"reference and hypothesis cover different line_ids for {ref.doc_id!r}"
        )
    n = len(ref_ids)
    ref_of: dict[int, int] = {}
    for seg_index, segment in enumerate(ref.segments):
        for line_id in segment.line_ids:
            ref_of[line_id] = seg_index
    overlap = np.zeros((len(hyp.segments), len(ref.segments)), dtype=np.int64)
    for seg_index, segment in enumerate(hyp.segments):
        for line_id in segment.line_ids:
            overlap[seg_index, ref_of[line_id]] += 1
    if alignment == "optimal":
        rows, cols = linear_sum_assignment(overlap, maximize=True)
        matched = int(overlap[rows, cols].sum())
    elif alignment == "greedy":
        work = overlap.copy()
        matched = 0
        for _ in range(min(work.shape)):
            flat = int(work.argmax())
            r, c = divmod(flat, work.shape[1])
            if work[r, c] <= 0:
                break
            matched += int(work[r, c])
            work[r, :] = -1
            work[:, c] = -1
    else:
        raise ValueError(f"unknown alignment {alignment!r}")
    return matched / n


# ---------------------------------------------------------------------------
# Per-document scoring and aggregation


@dataclass(frozen=True)
class DocumentScore:
    doc_id: str
    subset: str
    f1: float
    pk: float
    wd: float
    topic_acc: float | None
    k_used: int
    n_utterances: int


def score_pair(
    doc: Document,
    gold: Segmentation,
    pred: Segmentation,
    k: int | None = None,
) -> DocumentScore:
    """Score one prediction against gold; topic accuracy only when both
    carry topic labels is not required (it aligns segments, not labels), so
    it is always computed."""
    ref_bv = boundary_vector_for(doc, gold)
    hyp_bv = boundary_vector_for(doc, pred)
    k_used = default_k(ref_bv) if k is None else k
    return DocumentScore(
        doc_id=doc.doc_id,
        subset=doc.data_source,
        f1=boundary_f1_macro(ref_bv, hyp_bv),
        pk=pk(ref_bv, hyp_bv, k_used),
        wd=window_diff(ref_bv, hyp_bv, k_used),
        topic_acc=topic_accuracy(gold, pred),
        k_used=k_used,
        n_utterances=doc.n_utterances,
    )


METRIC_FIELDS = ("f1", "pk", "wd", "topic_acc")
# Direction per metric: +1 when higher is better, -1 when lower is better.
METRIC_DIRECTIONS = {"f1": 1, "pk": -1, "wd": -1, "topic_acc": 1}


@dataclass
class ScoreReport:
    """Scores for one or more models over one evaluation corpus."""

    scores: dict[str, list[DocumentScore]]

    def models(self) -> list[str]:
        return sorted(self.scores)

    def subsets(self) -> list[str]:
        names = {s.subset for rows in self.scores.values() for s in rows}
        return sorted(names)

    def per_subset(self, model: str) -> dict[str, dict[str, float]]:
        rows = self.scores[model]
        out: dict[str, dict[str, float]] = {}
        for subset in sorted({r.subset for r in rows}):
            group = [r for r in rows if r.subset == subset]
            out[subset] = {
                m: float(np.mean([getattr(r, m) for r in group])) for m in METRIC_FIELDS
            }
        return out

    def overall(self, model: str) -> dict[str, float]:
        """Unweighted mean of the per-subset means."""
        per = self.per_subset(model)
        return {
            m: float(np.mean([vals[m] for vals in per.values()])) for m in METRIC_FIELDS
        }

    def metric_table(self, metric: str) -> dict[str, dict[str, float]]:
        """model -> subset -> mean value, for rank summaries."""
        if metric not in METRIC_FIELDS:
            raise ValueError(f"unknown metric {metric!r}")
        return {
            model: {subset: vals[metric] for subset, vals in self.per_subset(model).items()}
            for model in self.models()
        }

    def to_obj(self) -> dict:
        return {
            "models": {
                model: {
                    "per_document": [asdict(r) for r in sorted(self.scores[model], key=lambda r: r.doc_id)],
                    "per_subset": self.per_subset(model),
                    "overall": self.overall(model),
                }
                for model in self.models()
            }
        }

    def to_json(self) -> str:
        return json.dumps(self.to_obj(), ensure_ascii=False, indent=2, sort_keys=True) + "\n"

    def to_text_table(self) -> str:
        """Aligned table: one row per model, one F1/Pk/WD column triple per
        subset plus the overall triple."""
        subsets = self.subsets()
        header_groups = subsets + ["Overall"]
        columns = ["Model"]
        for group in header_groups:
            for metric in ("F1", "Pk", "WD"):
                columns.append(f"{group}:{metric}")
        rows = []
        for model in self.models():
            per = self.per_subset(model)
            row = [model]
            for subset in subsets:
                vals = per.get(subset)
                if vals is None:
                    row.extend(["-"] * 3)
                else:
                    row.extend(f"{vals[m]:.2f}" for m in ("f1", "pk", "wd"))
            overall = self.overall(model)
            row.extend(f"{overall[m]:.2f}" for m in ("f1", "pk", "wd"))
            rows.append(row)
        widths = [max(len(r[i]) for r in [columns, *rows]) for i in range(len(columns))]
        lines = [
            "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(columns)).rstrip(),
            "  ".join("-" * widths[i] for i in range(len(columns))).rstrip(),
        ]
        for row in rows:
            lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
        return "\n".join(lines) + "\n"


def score_documents(
    runs: Mapping[str, Mapping[str, Segmentation]],
    docs: Mapping[str, Document],
    gold: Mapping[str, Segmentation],
    k: int | None = None,
) -> ScoreReport:
    """Score predictions per model. runs maps model -> doc_id -> prediction.
    Every predicted doc_id must have a document and a gold segmentation."""
    report: dict[str, list[DocumentScore]] = {}
    for model, preds in runs.items():
        rows = []
        for doc_id in sorted(preds):
            if doc_id not in docs:
                raise KeyError(f"model {model!r} predicted unknown document {doc_id!r}")
            if doc_id not in gold:
                raise KeyError(f"no gold segmentation for document {doc_id!r}")
            rows.append(score_pair(docs[doc_id], gold[doc_id], preds[doc_id], k=k))
        report[model] = rows
    return ScoreReport(report)


# ---------------------------------------------------------------------------
# Rank aggregation


@dataclass(frozen=True)
class RankSummary:
    model: str
    ranks: tuple[float, ...]
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float


def _average_ranks(values: Sequence[float], direction: int) -> list[float]:
    """Rank 1 = best. Ties share the average of their positional ranks."""
    order_values = [direction * -v for v in values]  # smaller = better after flip
    indexed = sorted(range(len(values)), key=lambda i: order_values[i])
    ranks = [0.0] * len(values)
    position = 0
    while position < len(indexed):
        tie_end = position
        while (
            tie_end + 1 < len(indexed)
            and order_values[indexed[tie_end + 1]] == order_values[indexed[position]]
        ):
            tie_end += 1
        average = (position + tie_end) / 2 + 1
        for j in range(position, tie_end + 1):
            ranks[indexed[j]] = average
        position = tie_end + 1
    return ranks


def rank_summary(
    table: Mapping[str, Mapping[str, float]],
    direction: int | str = -1,
) -> dict[str, RankSummary]:
    """Box-plot rank statistics for a model x dataset score table.

    direction: -1 (or 'lower') when lower scores are better, +1 (or 'higher')
    otherwise. Every model must have a value for every dataset; a missing
    cell is a hard error. Quartiles use linear interpolation; whiskers are
    the farthest ranks within 1.5 IQR of the quartiles.
    """
    if isinstance(direction, str):
        direction = {"lower": -1, "higher": 1}[direction]
    if direction not in (-1, 1):
        raise ValueError(f"direction must be -1 or +1, got {direction!r}")
    models = sorted(table)
    if not models:
        raise ValueError("rank_summary needs at least one model")
    datasets = sorted(table[models[0]])
    for model in models:
        missing = [d for d in datasets if d not in table[model]] + [
            d for d in table[model] if d not in datasets
        ]
        if missing:
            raise ValueError(
                f"model {model!r} is missing or adds dataset cells: {sorted(set(missing))}"
            )
    per_model_ranks: dict[str, list[float]] = {m: [] for m in models}
    for dataset in datasets:
        ranks = _average_ranks([table[m][dataset] for m in models], direction)
        for model, rank in zip(models, ranks):
            per_model_ranks[model].append(rank)
    out: dict[str, RankSummary] = {}
    for model in models:
        ranks = np.asarray(per_model_ranks[model], dtype=float)
        q1, median, q3 = (float(np.percentile(ranks, q)) for q in (25, 50, 75))
        iqr = q3 - q1
        low_fence, high_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = ranks[(ranks >= low_fence) & (ranks <= high_fence)]
        out[model] = RankSummary(
            model=model,
            ranks=tuple(float(r) for r in ranks),
            median=median,
            q1=q1,
            q3=q3,
            whisker_low=float(inside.min()),
            whisker_high=float(inside.max()),
        )
    return out


def rank_summary_csv(summaries: Mapping[str, RankSummary]) -> str:
    """Box-plot statistics as CSV, one row per model."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "median", "q1", "q3", "whisker_low", "whisker_high", "ranks"])
    for model in sorted(summaries):
        s = summaries[model]
        writer.writerow(
            [
                s.model,
                f"{s.median:g}",
                f"{s.q1:g}",
                f"{s.q3:g}",
                f"{s.whisker_low:g}",
                f"{s.whisker_high:g}",
                " ".join(f"{r:g}" for r in s.ranks),
            ]
        )
    return buf.getvalue()
