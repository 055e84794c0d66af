"""Sentence embeddings: remote or local providers, a JSONL cache, exact kNN.

Cache keys are sha256 hashes of the normalized sentence (lowercased,
whitespace-collapsed) plus the embedding model id, so re-running a pipeline
never re-embeds text it has already seen. Search is a brute-force cosine
scan: the candidate pools here are a few thousand vectors at most, where an
exact scan is both faster to run and simpler to trust than an approximate
index.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
import re
import threading
import time
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Protocol

import numpy as np
import requests

from .errors import DimensionMismatchError, ProviderError, ZeroVectorError
from .gateway import API_KEY_ENV, DEFAULT_TIMEOUT, post_with_retry

WS_RE = re.compile(r"\s+")


def normalize_for_key(text: str) -> str:
    return WS_RE.sub(" ", text).strip().lower()


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    model_id: str

    def __post_init__(self) -> None:
        if not self.values:
            raise ValueError("embedding must have at least one component")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding components must be finite")

    @property
    def dim(self) -> int:
        return len(self.values)

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)


@dataclass(frozen=True)
class EmbeddingKey:
    content_hash: str
    model_id: str


@dataclass(frozen=True)
class NeighborHit:
    record_id: str
    similarity: float


def embedding_key(text: str, model_id: str) -> EmbeddingKey:
    digest = hashlib.sha256(normalize_for_key(text).encode("utf-8")).hexdigest()
    return EmbeddingKey(content_hash=digest, model_id=model_id)


class EmbeddingProvider(Protocol):
    model_id: str

    def embed_text(self, text: str) -> EmbeddingVector: ...


class LocalHashEmbedder:
    """Deterministic offline embedder: hash tokens into buckets, L2-normalize.

    Not semantically meaningful; it exists so retrieval plumbing is testable
    without a network. Identical text always yields identical vectors.
    """

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.model_id = f"local-hash-{dim}"
        self.calls = 0

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text.strip():
            raise ValueError("cannot embed empty text")
        self.calls += 1
        counts = np.zeros(self.dim, dtype=np.float64)
        for token in normalize_for_key(text).split(" "):
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            bucket = int.from_bytes(digest[:8], "big") % self.dim
            counts[bucket] += 1.0
        norm = float(np.linalg.norm(counts))
        if norm == 0.0:
            raise ValueError("cannot embed empty text")
        counts /= norm
        return EmbeddingVector(values=tuple(float(v) for v in counts), model_id=self.model_id)


class HttpEmbeddingProvider:
    """OpenAI-compatible /v1/embeddings over HTTP."""

    def __init__(
        self,
        base_url: str,
        model_id: str,
        api_key: str | None = None,
        timeout: float = DEFAULT_TIMEOUT,
        sleeper: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model_id = model_id
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.timeout = timeout
        self.sleeper = sleeper
        self.rng = rng
        self.session = session
        self.calls = 0

    def embed_text(self, text: str) -> EmbeddingVector:
        if not self.api_key:
            raise ProviderError(f"no API key: set {API_KEY_ENV} or pass api_key")
        self.calls += 1
        response = post_with_retry(
            f"{self.base_url}/v1/embeddings",
            {"model": self.model_id, "input": text},
            {"Authorization": f"Bearer {self.api_key}"},
            timeout=self.timeout,
            sleeper=self.sleeper,
            rng=self.rng,
            session=self.session,
        )
        try:
            data = response.json()
            values = data["data"][0]["embedding"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed embedding payload: {exc}") from exc
        return EmbeddingVector(values=tuple(float(v) for v in values), model_id=self.model_id)


class EmbeddingCache:
    """Write-through JSONL cache keyed by (content hash, model id).

    One line per vector: {"key", "model", "dim", "vector"}. All vectors of a
    model must share one dimension; a mismatch is rejected at insert time.
    Reads are lock-free against the in-memory map; writes are serialized.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._vectors: dict[tuple[str, str], EmbeddingVector] = {}
        self._dims: dict[str, int] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as handle:
                for line in handle:
                    if not line.strip():
                        continue
                    obj = json.loads(line)
                    vector = EmbeddingVector(
                        values=tuple(float(v) for v in obj["vector"]),
                        model_id=obj["model"],
                    )
                    self._check_dim(vector)
                    self._vectors[(obj["key"], obj["model"])] = vector
                    self._dims[obj["model"]] = vector.dim

    def __len__(self) -> int:
        return len(self._vectors)

    def _check_dim(self, vector: EmbeddingVector) -> None:
        known = self._dims.get(vector.model_id)
        if known is not None and known != vector.dim:
            raise DimensionMismatchError(
                f"model {vector.model_id!r} previously produced dim {known}, got {vector.dim}"
            )

    def get(self, key: EmbeddingKey) -> EmbeddingVector | None:
        return self._vectors.get((key.content_hash, key.model_id))

    def put(self, key: EmbeddingKey, vector: EmbeddingVector) -> None:
        if key.model_id != vector.model_id:
            raise ValueError("key and vector disagree on model_id")
        self._check_dim(vector)
        line = json.dumps(
            {
                "key": key.content_hash,
                "model": key.model_id,
                "dim": vector.dim,
                "vector": list(vector.values),
            },
            sort_keys=True,
        )
        with self._lock:
            self._check_dim(vector)
            if (key.content_hash, key.model_id) in self._vectors:
                return
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")
            self._vectors[(key.content_hash, key.model_id)] = vector
            self._dims[key.model_id] = vector.dim


def embed(text: str, provider: EmbeddingProvider, cache: EmbeddingCache | None = None) -> EmbeddingVector:
    """Fetch one embedding, going to the provider only on a cache miss."""
    if not text.strip():
        raise ValueError("cannot embed empty text")
    if cache is None:
        return provider.embed_text(text)
    key = embedding_key(text, provider.model_id)
    hit = cache.get(key)
    if hit is not None:
        return hit
    vector = provider.embed_text(text)
    cache.put(key, vector)
    return vector


@dataclass
class EmbeddingService:
    """A provider plus optional write-through cache, as one handle."""

    provider: EmbeddingProvider
    cache: EmbeddingCache | None = None

    @property
    def model_id(self) -> str:
        return self.provider.model_id

    def vector(self, text: str) -> EmbeddingVector:
        return embed(text, self.provider, self.cache)


def cosine_similarity(a: EmbeddingVector, b: EmbeddingVector) -> float:
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dim {a.dim} vs {b.dim}")
    norm_a = float(np.linalg.norm(a.array))
    norm_b = float(np.linalg.norm(b.array))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVectorError("cosine similarity undefined for an all-zero vector")
    return float(np.dot(a.array, b.array) / (norm_a * norm_b))


def knn_search(
    query: EmbeddingVector, corpus: dict[str, EmbeddingVector], k: int
) -> list[NeighborHit]:
    """Exact top-k by cosine similarity, ties broken by ascending record id."""
    if not corpus:
        raise ValueError("corpus must be non-empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = [
        (cosine_similarity(query, vector), record_id)
        for record_id, vector in corpus.items()
    ]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [NeighborHit(record_id=rid, similarity=sim) for sim, rid in scored[:k]]
