"""Example selection strategies: zeroshot, random, kNN, pattern, kNN+pattern.

Pattern retrieval fuzzy-matches the input sentence's causal connective
against the repository's index keys and pools the records stored under
every key scoring above the similarity threshold. kNN retrieval ranks
repository sentences by embedding cosine similarity. The combined strategy
concatenates both blocks, kNN first, deduplicated by record id.

All sampling is driven by (seed, salt) so that a fixed configuration
reproduces identical choices; the runner salts with the input sentence id,
giving per-sentence variety without losing reproducibility.
"""

from __future__ import annotations

import random
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .embedding import EmbeddingService, knn_search
from .errors import EmptyConnectiveError, UnparseableResponseError
from .gateway import LlmClient
from .kernels import edit_ratio, token_subsequence
from .prompting import PromptCatalog, connective_prompt
from .repository import Repository, ExampleRecord, normalize_connective, parse_connective_response

MATCHERS = ("edit_ratio", "token_containment")


class StrategyKind(Enum):
    ZEROSHOT = "zeroshot"
    RANDOM = "random"
    KNN = "knn"
    PATTERN = "pattern"
    KNN_PATTERN = "knn-pattern"


@dataclass(frozen=True)
class RetrievalConfig:
    k: int = 10
    similarity_threshold: float = 0.90
    matcher: str = "edit_ratio"
    seed: int = 0
    fallback_to_random: bool = True

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0.0 < self.similarity_threshold <= 1.0:
            raise ValueError("similarity_threshold must be in (0, 1]")
        if self.matcher not in MATCHERS:
            raise ValueError(f"matcher must be one of {MATCHERS}")


@dataclass(frozen=True)
class ExampleProvenance:
    record_id: str
    origin: str  # "random", "knn", "pattern", "random-fallback"
    score: float | None = None
    connective: str | None = None


@dataclass(frozen=True)
class RetrievalResult:
    examples: tuple[ExampleRecord, ...]
    provenance: tuple[ExampleProvenance, ...]
    strategy: StrategyKind
    fallback_used: bool = False

    def __post_init__(self) -> None:
        if len(self.examples) != len(self.provenance):
            raise ValueError("examples and provenance must align")
        ids = [record.id for record in self.examples]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate record ids in retrieval result")


def zeroshot_result() -> RetrievalResult:
    return RetrievalResult(examples=(), provenance=(), strategy=StrategyKind.ZEROSHOT)


def _rng(cfg: RetrievalConfig, salt: str) -> random.Random:
    return random.Random(f"{cfg.seed}|{salt}")


def connective_similarity(a: str, b: str, matcher: str = "edit_ratio") -> float:
    """Similarity of two connectives in [0, 1].

    edit_ratio: 1 - editdistance/max(len), unit-cost character edits.
    token_containment: 1.0 when the shorter connective's tokens occur
    contiguously inside the longer's, else the edit_ratio value.
    """
    if matcher not in MATCHERS:
        raise ValueError(f"matcher must be one of {MATCHERS}")
    a = normalize_connective(a)
    b = normalize_connective(b)
    if not a or not b:
        raise EmptyConnectiveError("connectives must be non-empty")
    if matcher == "token_containment":
        needle, haystack = (a, b) if len(a) <= len(b) else (b, a)
        if token_subsequence(tuple(needle.split(" ")), tuple(haystack.split(" "))):
            return 1.0
    return edit_ratio(a, b)


def retrieve_random(repo: Repository, cfg: RetrievalConfig, salt: str = "") -> RetrievalResult:
    """Seeded uniform sample of min(k, |repo|) records, without replacement."""
    if not repo.records:
        raise ValueError("repository is empty")
    ids = sorted(repo.records)
    chosen = _rng(cfg, salt).sample(ids, min(cfg.k, len(ids)))
    return RetrievalResult(
        examples=tuple(repo.records[rid] for rid in chosen),
        provenance=tuple(ExampleProvenance(record_id=rid, origin="random") for rid in chosen),
        strategy=StrategyKind.RANDOM,
    )


def retrieve_knn(
    input_text: str,
    repo: Repository,
    embeddings: EmbeddingService,
    cfg: RetrievalConfig,
) -> RetrievalResult:
    """Top-k repository records by embedding similarity to the input."""
    if not repo.records:
        raise ValueError("repository is empty")
    query = embeddings.vector(input_text)
    corpus = {rid: embeddings.vector(record.raw_text) for rid, record in repo.records.items()}
    hits = knn_search(query, corpus, cfg.k)
    return RetrievalResult(
        examples=tuple(repo.records[hit.record_id] for hit in hits),
        provenance=tuple(
            ExampleProvenance(record_id=hit.record_id, origin="knn", score=hit.similarity)
            for hit in hits
        ),
        strategy=StrategyKind.KNN,
    )


def _pattern_candidates(
    input_connectives: Sequence[str], repo: Repository, cfg: RetrievalConfig
) -> dict[str, tuple[float, str]]:
    """Map record id -> (best similarity, matched index key) over all index
    keys scoring strictly above the threshold against any input connective."""
    normalized = [normalize_connective(c) for c in input_connectives]
    normalized = [c for c in normalized if c]
    best: dict[str, tuple[float, str]] = {}
    for key in repo.index:
        key_score = 0.0
        for connective in normalized:
            key_score = max(key_score, connective_similarity(connective, key, cfg.matcher))
        if key_score <= cfg.similarity_threshold:
            continue
        for rid in repo.index[key]:
            held = best.get(rid)
            # prefer higher similarity; on ties the lexicographically
            # smallest key, so results never depend on dict order
            if held is None or (key_score, held[1]) > (held[0], key):
                best[rid] = (key_score, key)
    return best


def retrieve_pattern(
    input_connectives: Sequence[str],
    repo: Repository,
    cfg: RetrievalConfig,
    salt: str = "",
) -> RetrievalResult:
    """Records indexed under connectives similar to the input's connective.

    Over-full candidate pools are down-sampled to k (seeded); an empty pool
    falls back to random retrieval when configured, marked in provenance.
    """
    if not repo.records:
        raise ValueError("repository is empty")
    best = _pattern_candidates(input_connectives, repo, cfg)
    if not best:
        if not cfg.fallback_to_random:
            return RetrievalResult(examples=(), provenance=(), strategy=StrategyKind.PATTERN)
        fallback = retrieve_random(repo, cfg, salt)
        return RetrievalResult(
            examples=fallback.examples,
            provenance=tuple(
                ExampleProvenance(record_id=p.record_id, origin="random-fallback")
                for p in fallback.provenance
            ),
            strategy=StrategyKind.PATTERN,
            fallback_used=True,
        )
    chosen = sorted(best)
    if len(chosen) > cfg.k:
        chosen = _rng(cfg, salt).sample(chosen, cfg.k)
    chosen.sort(key=lambda rid: (-best[rid][0], rid))
    return RetrievalResult(
        examples=tuple(repo.records[rid] for rid in chosen),
        provenance=tuple(
            ExampleProvenance(
                record_id=rid, origin="pattern", score=best[rid][0], connective=best[rid][1]
            )
            for rid in chosen
        ),
        strategy=StrategyKind.PATTERN,
    )


def retrieve_knn_pattern(
    input_text: str,
    input_connectives: Sequence[str],
    repo: Repository,
    embeddings: EmbeddingService,
    cfg: RetrievalConfig,
    salt: str = "",
) -> RetrievalResult:
    """Concatenate the kNN block and the pattern block, kNN first, then drop
    duplicate record ids keeping the first occurrence; at most 2k examples."""
    knn = retrieve_knn(input_text, repo, embeddings, cfg)
    pattern = retrieve_pattern(input_connectives, repo, cfg, salt)
    examples: list[ExampleRecord] = []
    provenance: list[ExampleProvenance] = []
    seen: set[str] = set()
    for block in (knn, pattern):
        for record, prov in zip(block.examples, block.provenance):
            if record.id in seen:
                continue
            seen.add(record.id)
            examples.append(record)
            provenance.append(prov)
    return RetrievalResult(
        examples=tuple(examples),
        provenance=tuple(provenance),
        strategy=StrategyKind.KNN_PATTERN,
        fallback_used=pattern.fallback_used,
    )


class ConnectiveCache:
    """Per-sentence-id cache of extracted input connectives: concurrent
    reads, serialized inserts."""

    def __init__(self) -> None:
        self._data: dict[str, tuple[str, ...]] = {}
        self._lock = threading.Lock()

    def get(self, key: str) -> tuple[str, ...] | None:
        return self._data.get(key)

    def put(self, key: str, value: Sequence[str]) -> None:
        with self._lock:
            self._data[key] = tuple(value)


def input_connectives(
    sentence: str,
    llm: LlmClient,
    catalog: PromptCatalog | None = None,
    cache: ConnectiveCache | None = None,
    key: str | None = None,
) -> list[str]:
    """Extract the input sentence's causal connective(s) with the model.

    Returns [] when the response has no parseable connective, which sends
    pattern retrieval to its fallback path. With a cache and key, repeated
    calls for the same sentence id make no further provider calls."""
    if cache is not None and key is not None:
        held = cache.get(key)
        if held is not None:
            return list(held)
    prompt = connective_prompt(sentence, catalog)
    try:
        connectives = parse_connective_response(
            llm.complete_text(prompt.system_text, prompt.user_text)
        )
    except UnparseableResponseError:
        connectives = []
    if cache is not None and key is not None:
        cache.put(key, connectives)
    return connectives
