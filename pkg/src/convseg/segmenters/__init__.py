"""Segmenter estimators: lexical, embedding-based, prompted, and baselines."""
from __future__ import annotations

from ..clients import EmbeddingProviderConfig, LlmConfig, build_embedding_provider
from .base import DegenerateSegmenter, SegmenterError, UtteranceSegmenter
from .classical import C99Segmenter, TextTilingSegmenter
from .embedding import EmbeddingTilingSegmenter
from .llm import CallMeta, LlmSegmenter, llm_segment

SEGMENTER_NAMES = ("texttiling", "c99", "embedding-tiling", "llm", "degenerate")


def build_segmenter(name: str, params: dict | None = None) -> UtteranceSegmenter:
    """Construct a segmenter by CLI name from a plain parameter dict.

    Embedding and LLM segmenters take nested service configs:
    {"provider": {...EmbeddingProviderConfig fields...}} and
    {"config": {...LlmConfig fields...}} respectively.
    """
    params = dict(params or {})
    if name == "texttiling":
        return TextTilingSegmenter(**params)
    if name == "c99":
        return C99Segmenter(**params)
    if name == "embedding-tiling":
        provider = params.pop("provider", None)
        if isinstance(provider, dict):
            provider_kwargs = params.pop("provider_options", {})
            provider = build_embedding_provider(
                EmbeddingProviderConfig(**provider), **provider_kwargs
            )
        return EmbeddingTilingSegmenter(provider=provider, **params)
    if name == "llm":
        config = params.pop("config", None)
        if isinstance(config, dict):
            config = LlmConfig(**config)
        return LlmSegmenter(config=config, **params)
    if name == "degenerate":
        return DegenerateSegmenter(**params)
    raise ValueError(f"unknown segmenter {name!r}; expected one of {SEGMENTER_NAMES}")


__all__ = [
    "CallMeta",
    "C99Segmenter",
    "DegenerateSegmenter",
    "EmbeddingTilingSegmenter",
    "LlmSegmenter",
    "SEGMENTER_NAMES",
    "SegmenterError",
    "TextTilingSegmenter",
    "UtteranceSegmenter",
    "build_segmenter",
    "llm_segment",
]
