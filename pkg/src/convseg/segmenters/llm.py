"""Prompted segmenter: render, call the chat service, validate, re-prompt
once with the violation list, then repair or fall back.
"""
from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass, field

from ..clients import ChatCompletionsClient, ChatServiceError, LlmConfig
from ..corpus import Document, Segmentation, segmentation_from_lengths
from ..corruption import DraftBlocks
from ..protocol import parse_and_validate, render_prompt, repair
from .base import SegmenterError, UtteranceSegmenter

logger = logging.getLogger(__name__)

CORRECTION_PREAMBLE = (
    "Your previous answer violates the required output contract. Violations:"
)
CORRECTION_CLOSING = (
    "Return ONLY the corrected JSON array, following every rule in the "
    "original instructions. No explanations."
)


@dataclass(frozen=True)
class CallMeta:
    """Bookkeeping for one prompted segmentation call."""

    doc_id: str
    mode: str
    latency_s: float
    reprompts: int
    repaired: bool
    fallback: bool
    repair_actions: tuple[str, ...]
    response_sha256: str
    violations: tuple[str, ...] = field(default=())

    def to_obj(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "mode": self.mode,
            "latency_s": self.latency_s,
            "reprompts": self.reprompts,
            "repaired": self.repaired,
            "fallback": self.fallback,
            "repair_actions": list(self.repair_actions),
            "response_sha256": self.response_sha256,
            "violations": list(self.violations),
        }


def _correction_message(violations) -> str:
    lines = [CORRECTION_PREAMBLE]
    lines.extend(f"- {v.message}" for v in violations)
    lines.append(CORRECTION_CLOSING)
    return "\n".join(lines)


def llm_segment(
    doc: Document,
    config: LlmConfig,
    mode: str = "segmentation",
    draft: DraftBlocks | None = None,
    client: ChatCompletionsClient | None = None,
) -> tuple[Segmentation, CallMeta]:
    """One validated prompted-segmentation exchange.

    First response is parsed and validated; if defective, one corrective
    re-prompt quoting the violations is sent. A still-defective but parseable
    answer is deterministically repaired; an unparseable one falls back to the
    single whole-document segment, flagged in the metadata. Transport failures
    (after the client's own retries) raise SegmenterError.
    """
    template_id = mode
    prompt = render_prompt(template_id, doc, draft=draft)
    own_client = client is None
    if client is None:
        client = ChatCompletionsClient(config)
    started = time.perf_counter()
    try:
        messages = [{"role": "user", "content": prompt}]
        try:
            response = client.complete(messages)
        except ChatServiceError as exc:
            raise SegmenterError(f"chat service failed for {doc.doc_id}: {exc}") from exc
        result = parse_and_validate(response, doc, mode=mode, draft=draft)
        reprompts = 0
        first_violations = tuple(v.message for v in result.violations)
        if not result.ok:
            messages = messages + [
                {"role": "assistant", "content": response},
                {"role": "user", "content": _correction_message(result.violations)},
            ]
            try:
                response = client.complete(messages)
            except ChatServiceError as exc:
                raise SegmenterError(f"chat service failed for {doc.doc_id}: {exc}") from exc
            reprompts = 1
            result = parse_and_validate(response, doc, mode=mode, draft=draft)
        latency = time.perf_counter() - started
        response_hash = hashlib.sha256(response.encode("utf-8")).hexdigest()
        if result.ok:
            assert result.segmentation is not None
            return result.segmentation, CallMeta(
                doc_id=doc.doc_id,
                mode=mode,
                latency_s=latency,
                reprompts=reprompts,
                repaired=False,
                fallback=False,
                repair_actions=(),
                response_sha256=response_hash,
                violations=first_violations,
            )
        if result.segmentation is not None:
            repaired, actions = repair(result.segmentation, doc, draft=draft)
            logger.warning(
                "repaired response for %s after %d reprompt(s): %s",
                doc.doc_id,
                reprompts,
                "; ".join(actions),
            )
            return repaired, CallMeta(
                doc_id=doc.doc_id,
                mode=mode,
                latency_s=latency,
                reprompts=reprompts,
                repaired=True,
                fallback=False,
                repair_actions=actions,
                response_sha256=response_hash,
                violations=tuple(v.message for v in result.violations),
            )
        logger.warning(
            "unparseable response for %s after %d reprompt(s): falling back to one segment",
            doc.doc_id,
            reprompts,
        )
        fallback = segmentation_from_lengths(
            doc.doc_id, [doc.n_utterances], first_line_id=doc.first_line_id
        )
        if draft is not None:
            fallback, _ = repair(fallback, doc, draft=draft)
        return fallback, CallMeta(
            doc_id=doc.doc_id,
            mode=mode,
            latency_s=latency,
            reprompts=reprompts,
            repaired=False,
            fallback=True,
            repair_actions=(),
            response_sha256=response_hash,
            violations=tuple(v.message for v in result.violations),
        )
    finally:
        if own_client:
            client.close()


class LlmSegmenter(UtteranceSegmenter):
    """Estimator wrapper around llm_segment.

    mode 'segmentation' needs only documents; mode 'restoration' additionally
    needs drafts, a mapping doc_id -> DraftBlocks. call_metas collects one
    CallMeta per segmented document (cleared on each predict).
    """

    def __init__(
        self,
        config: LlmConfig | None = None,
        mode: str = "segmentation",
        drafts: dict[str, DraftBlocks] | None = None,
    ):
        self.config = config
        self.mode = mode
        self.drafts = drafts
        self.call_metas: list[CallMeta] = []

    def predict(self, X) -> list[Segmentation]:
        self.call_metas = []
        return super().predict(X)

    def _segment_document(self, doc: Document) -> Segmentation:
        if self.config is None:
            raise ValueError("LlmSegmenter needs an LlmConfig")
        draft = None
        if self.mode == "restoration":
            if not self.drafts or doc.doc_id not in self.drafts:
                raise ValueError(f"restoration mode needs draft blocks for {doc.doc_id!r}")
            draft = self.drafts[doc.doc_id]
        seg, meta = llm_segment(doc, self.config, mode=self.mode, draft=draft)
        self.call_metas.append(meta)
        return seg
