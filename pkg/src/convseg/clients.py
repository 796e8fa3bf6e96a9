"""HTTP clients for chat-completion and embedding services, plus
deterministic mock transports for offline runs.

Real endpoints are plain https URLs; API keys come from the environment
(never from flags or config files). Endpoints starting with "mock://" are
served in-process so pipelines can run without a network.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np

from .corpus import Document

logger = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "CONVSEG_API_KEY"


class ChatServiceError(RuntimeError):
    """The chat service failed after all transport retries."""


class EmbeddingServiceError(RuntimeError):
    """The embedding service failed after all transport retries."""


@dataclass(frozen=True)
class LlmConfig:
    """Chat-completion service settings. temperature stays within [0, 0.1]:
    the protocol is meant to be near-deterministic."""

    endpoint: str
    model_id: str
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 60.0
    api_key_env: str = DEFAULT_API_KEY_ENV
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.temperature <= 0.1:
            raise ValueError(
                f"temperature must be within [0.0, 0.1], got {self.temperature}"
            )
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def _auth_headers(api_key_env: str) -> dict[str, str]:
    key = os.environ.get(api_key_env, "")
    return {"Authorization": f"Bearer {key}"} if key else {}


def _retrying_post(
    client: httpx.Client,
    url: str,
    payload: dict,
    headers: dict[str, str],
    max_retries: int,
    backoff_base: float,
    error_cls: type[RuntimeError],
) -> dict:
    last_error: Exception | None = None
    for attempt in range(max_retries + 1):
        if attempt:
            delay = backoff_base * (2 ** (attempt - 1))
            if delay:
                time.sleep(delay)
        try:
            response = client.post(url, json=payload, headers=headers)
        except httpx.HTTPError as exc:
            last_error = exc
            logger.warning("request to %s failed (attempt %d): %s", url, attempt + 1, exc)
            continue
        if response.status_code in (429,) or response.status_code >= 500:
            last_error = RuntimeError(f"HTTP {response.status_code}: {response.text[:200]}")
            logger.warning(
                "request to %s returned %d (attempt %d)", url, response.status_code, attempt + 1
            )
            continue
        if response.status_code != 200:
            raise error_cls(f"HTTP {response.status_code} from {url}: {response.text[:500]}")
        try:
            return response.json()
        except json.JSONDecodeError as exc:
            raise error_cls(f"non-JSON response from {url}: {exc}") from exc
    raise error_cls(f"request to {url} failed after {max_retries + 1} attempts: {last_error}")


class ChatCompletionsClient:
    """Minimal chat-completions wire client.

    Request: {"model", "messages": [{"role", "content"}...], "temperature"}.
    Response: first choice's message content.
    """

    def __init__(self, config: LlmConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        if transport is None and config.endpoint.startswith("mock:"):
            transport = mock_chat_transport(config.endpoint)
        self._client = httpx.Client(transport=transport, timeout=config.timeout)
        self._url = (
            "https://mock.invalid/v1/chat/completions"
            if config.endpoint.startswith("mock:")
            else config.endpoint
        )

    def complete(self, messages: Sequence[dict]) -> str:
        payload = {
            "model": self.config.model_id,
            "messages": list(messages),
            "temperature": self.config.temperature,
        }
        data = _retrying_post(
            self._client,
            self._url,
            payload,
            _auth_headers(self.config.api_key_env),
            self.config.max_retries,
            self.config.backoff_base,
            ChatServiceError,
        )
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ChatServiceError(f"malformed chat response shape: {data!r}") from exc

    def close(self) -> None:
        self._client.close()


# ---------------------------------------------------------------------------
# Embedding providers


@dataclass(frozen=True)
class EmbeddingProviderConfig:
    provider_kind: str  # "http_service" or "vector_file"
    endpoint_or_path: str
    model_id: str = ""
    dimension: int = 0

    def __post_init__(self) -> None:
        if self.provider_kind not in ("http_service", "vector_file"):
            raise ValueError(
                f"unknown provider_kind {self.provider_kind!r} "
                "(use 'http_service' or 'vector_file')"
            )


def _check_vector(vec: np.ndarray, dimension: int, context: str) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.ndim != 1:
        raise EmbeddingServiceError(f"{context}: expected a flat vector, got shape {vec.shape}")
    if dimension and vec.shape[0] != dimension:
        raise EmbeddingServiceError(
            f"{context}: dimension mismatch, expected {dimension}, got {vec.shape[0]}"
        )
    if not np.all(np.isfinite(vec)):
        raise EmbeddingServiceError(f"{context}: vector contains non-finite values")
    return vec


class VectorFileProvider:
    """Precomputed utterance vectors keyed by (doc_id, line_id), loaded from
    a JSONL file of {"doc_id", "line_id", "vector"} records."""

    def __init__(self, config: EmbeddingProviderConfig):
        self.config = config
        path = Path(config.endpoint_or_path)
        if not path.exists():
            raise FileNotFoundError(f"vector file not found: {path}")
        self._vectors: dict[tuple[str, int], np.ndarray] = {}
        dimension = config.dimension
        for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not raw.strip():
                continue
            obj = json.loads(raw)
            key = (str(obj["doc_id"]), int(obj["line_id"]))
            vec = _check_vector(
                np.asarray(obj["vector"], dtype=float), dimension, f"{path}:{lineno}"
            )
            if not dimension:
                dimension = vec.shape[0]
            self._vectors[key] = vec

    def lookup(self, keys: Sequence[tuple[str, int]]) -> np.ndarray:
        rows = []
        for doc_id, line_id in keys:
            key = (doc_id, int(line_id))
            if key not in self._vectors:
                raise KeyError(
                    f"vector file {self.config.endpoint_or_path} has no vector for "
                    f"doc_id={doc_id!r} line_id={line_id}"
                )
            rows.append(self._vectors[key])
        return np.vstack(rows)

    def vectors_for_document(self, doc: Document) -> np.ndarray:
        return self.lookup([(doc.doc_id, u.line_id) for u in doc.utterances])


class HttpEmbeddingProvider:
    """Embedding-service client with batching, retries, and a disk cache
    keyed by (model_id, sha256 of the text).

    Request: {"model", "input": [texts...]}.
    Response: {"data": [{"embedding": [...]}, ...]} in input order.
    """

    def __init__(
        self,
        config: EmbeddingProviderConfig,
        transport: httpx.BaseTransport | None = None,
        cache_dir: str | Path | None = None,
        batch_size: int = 64,
        max_retries: int = 3,
        timeout: float = 60.0,
        backoff_base: float = 0.5,
        api_key_env: str = DEFAULT_API_KEY_ENV,
    ):
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        self.config = config
        self.batch_size = batch_size
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.api_key_env = api_key_env
        if transport is None and config.endpoint_or_path.startswith("mock:"):
            transport = mock_embedding_transport(config.endpoint_or_path)
        self._client = httpx.Client(transport=transport, timeout=timeout)
        self._url = (
            "https://mock.invalid/v1/embeddings"
            if config.endpoint_or_path.startswith("mock:")
            else config.endpoint_or_path
        )
        self._lock = threading.Lock()
        self._cache: dict[str, np.ndarray] = {}
        self._cache_path: Path | None = None
        if cache_dir is not None:
            cache_dir = Path(cache_dir)
            cache_dir.mkdir(parents=True, exist_ok=True)
            stem = re.sub(r"[^A-Za-z0-9_.-]", "_", config.model_id or "default")
            self._cache_path = cache_dir / f"embeddings-{stem}.jsonl"
            if self._cache_path.exists():
                for raw in self._cache_path.read_text(encoding="utf-8").splitlines():
                    if not raw.strip():
                        continue
                    obj = json.loads(raw)
                    self._cache[obj["key"]] = np.asarray(obj["vector"], dtype=float)

    def _cache_key(self, text: str) -> str:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return f"{self.config.model_id}:{digest}"

    def _persist(self, key: str, vec: np.ndarray) -> None:
        if self._cache_path is None:
            return
        record = json.dumps({"key": key, "vector": [float(x) for x in vec]})
        with self._cache_path.open("a", encoding="utf-8") as fh:
            fh.write(record + "\n")

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        keys = [self._cache_key(t) for t in texts]
        with self._lock:
            missing = [i for i, key in enumerate(keys) if key not in self._cache]
            for start in range(0, len(missing), self.batch_size):
                chunk = missing[start : start + self.batch_size]
                payload = {
                    "model": self.config.model_id,
                    "input": [texts[i] for i in chunk],
                }
                data = _retrying_post(
                    self._client,
                    self._url,
                    payload,
                    _auth_headers(self.api_key_env),
                    self.max_retries,
                    self.backoff_base,
                    EmbeddingServiceError,
                )
                rows = data.get("data")
                if not isinstance(rows, list) or len(rows) != len(chunk):
                    raise EmbeddingServiceError(
                        f"embedding response has {len(rows) if isinstance(rows, list) else 'no'} "
                        f"rows for {len(chunk)} inputs"
                    )
                for i, row in zip(chunk, rows):
                    vec = _check_vector(
                        np.asarray(row["embedding"], dtype=float),
                        self.config.dimension,
                        f"embedding for input {i}",
                    )
                    self._cache[keys[i]] = vec
                    self._persist(keys[i], vec)
            return np.vstack([self._cache[key] for key in keys])

    def vectors_for_document(self, doc: Document) -> np.ndarray:
        return self.embed_texts([u.text for u in doc.utterances])

    def close(self) -> None:
        self._client.close()


def build_embedding_provider(
    config: EmbeddingProviderConfig, **kwargs
) -> VectorFileProvider | HttpEmbeddingProvider:
    if config.provider_kind == "vector_file":
        return VectorFileProvider(config)
    return HttpEmbeddingProvider(config, **kwargs)


# ---------------------------------------------------------------------------
# Mock transports
#
# mock chat endpoints:
#   mock://single           one segment over the whole conversation
#   mock://every/N          a boundary after every N utterances
#   mock://echo-blocks      restoration: one segment per draft block
# mock embedding endpoint:
#   mock://hash-embed/D     deterministic D-dim vectors derived from the text

_LINE_ID_RE = re.compile(r'"line_id":\s*(\d+)')


def _conversation_line_ids(prompt: str) -> list[int]:
    """Extract utterance line ids from a rendered prompt. Utterance JSON
    lines are the only places a literal "line_id": <int> pair appears."""
    seen: list[int] = []
    for match in _LINE_ID_RE.finditer(prompt):
        value = int(match.group(1))
        if value not in seen:
            seen.append(value)
    return seen


def _block_line_ids(prompt: str) -> list[list[int]]:
    blocks: list[list[int]] = []
    for section in prompt.split("===== DRAFT BLOCK ")[1:]:
        ids = _conversation_line_ids(section)
        if ids:
            blocks.append(ids)
    return blocks


def _chat_payload(content: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


def _segments_json(groups: list[list[int]]) -> str:
    items = [
        {"split_id": i + 1, "line_ids": ",".join(str(x) for x in group)}
        for i, group in enumerate(groups)
    ]
    return json.dumps(items)


def mock_chat_transport(endpoint: str) -> httpx.MockTransport:
    spec = endpoint[len("mock://"):]

    def handler(request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content.decode("utf-8"))
        prompt = payload["messages"][-1]["content"]
        if spec == "echo-blocks":
            blocks = _block_line_ids(prompt)
            if not blocks:
                ids = _conversation_line_ids(prompt)
                blocks = [ids] if ids else [[1]]
            return httpx.Response(200, json=_chat_payload(_segments_json(blocks)))
        ids = _conversation_line_ids(prompt)
        if not ids:
            return httpx.Response(200, json=_chat_payload("[]"))
        if spec.startswith("every/"):
            step = max(1, int(spec.split("/", 1)[1]))
            groups = [ids[i : i + step] for i in range(0, len(ids), step)]
        elif spec == "single":
            groups = [ids]
        else:
            raise ValueError(f"unknown mock chat endpoint {endpoint!r}")
        return httpx.Response(200, json=_chat_payload(_segments_json(groups)))

    return httpx.MockTransport(handler)


def mock_embedding_transport(endpoint: str) -> httpx.MockTransport:
    spec = endpoint[len("mock://"):]
    if not spec.startswith("hash-embed/"):
        raise ValueError(f"unknown mock embedding endpoint {endpoint!r}")
    dimension = int(spec.split("/", 1)[1])

    def handler(request: httpx.Request) -> httpx.Response:
        payload = json.loads(request.content.decode("utf-8"))
        rows = []
        for text in payload["input"]:
            digest = hashlib.sha256(text.encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
            rows.append({"embedding": rng.standard_normal(dimension).tolist()})
        return httpx.Response(200, json={"data": rows})

    return httpx.MockTransport(handler)
