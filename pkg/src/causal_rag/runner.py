"""Experiment orchestration: wire datasets, retrieval, prompts, and scoring.

A run walks every input instance: retrieve examples under the configured
strategy, assemble the prompt, complete it, parse the response, and append
one prediction record per sentence. Records are ordered by sentence id and
all sampling is salted with the sentence id, so outputs are byte-identical
across runs and across concurrency bounds whenever the transcript, seed,
and config are fixed. Unparseable responses are scored as failures, never
crashes; under the replay backend, timings are written as 0.0 to keep
output files reproducible.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .corpus import (
    CauseEffectPair,
    DatasetSplit,
    LabeledInstance,
    Triplet,
    load_dataset,
    sentence_triplets,
)
from .embedding import (
    EmbeddingCache,
    EmbeddingService,
    HttpEmbeddingProvider,
    LocalHashEmbedder,
)
from .errors import ProviderError, UnparseableResponseError
from .evaluation import (
    build_report,
    detection_metrics,
    single_pair_accuracy,
    triplet_metrics,
)
from .gateway import (
    Backend,
    CompletionRequest,
    LiveBackend,
    LlmClient,
    RecordBackend,
    ReplayBackend,
    Transcript,
    request_hash,
)
from .prompting import (
    PromptCatalog,
    default_catalog,
    detection_prompt,
    extraction_prompt,
    load_catalog,
    parse_detection,
    parse_extraction,
)
from .repository import Repository, build_repository, load_repository, save_repository
from .retrieval import (
    ConnectiveCache,
    RetrievalConfig,
    RetrievalResult,
    StrategyKind,
    input_connectives,
    retrieve_knn,
    retrieve_knn_pattern,
    retrieve_pattern,
    retrieve_random,
    zeroshot_result,
)

LOGGER = logging.getLogger(__name__)

TASKS = ("detect", "extract")
BACKENDS = ("live", "replay", "record")
DEFAULT_LOCAL_EMBEDDER = "local-hash-256"


@dataclass(frozen=True)
class ExperimentConfig:
    task: str
    strategy: StrategyKind
    dataset_path: str
    output_path: str
    db_path: str | None = None
    dataset_format: str = "jsonl"
    k: int = 10
    seed: int = 0
    single_pair: bool = False
    matcher: str = "edit_ratio"
    similarity_threshold: float = 0.90
    fallback_to_random: bool = True
    matching: str = "greedy"
    model_id: str = "gpt-4o"
    backend: str = "replay"
    base_url: str = "https://api.openai.com"
    temperature: float = 0.0
    max_output_tokens: int = 1024
    concurrency: int = 4
    transcript_path: str | None = None
    cache_path: str | None = None
    embedding_model: str = DEFAULT_LOCAL_EMBEDDER
    catalog_path: str | None = None
    force: bool = False

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}")
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}")
        if self.backend in ("replay", "record") and not self.transcript_path:
            raise ValueError(f"backend {self.backend!r} requires a transcript path")
        if self.strategy is not StrategyKind.ZEROSHOT and not self.db_path:
            raise ValueError(f"strategy {self.strategy.value!r} requires a repository db")
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")

    def retrieval_config(self) -> RetrievalConfig:
        return RetrievalConfig(
            k=self.k,
            similarity_threshold=self.similarity_threshold,
            matcher=self.matcher,
            seed=self.seed,
            fallback_to_random=self.fallback_to_random,
        )


@dataclass
class RunResult:
    records: list[dict]
    report: dict
    output_path: str
    skipped_existing: int = 0


def make_backend(config: ExperimentConfig) -> Backend:
    if config.backend == "replay":
        return ReplayBackend(Transcript(config.transcript_path))
    live = LiveBackend(config.base_url)
    if config.backend == "record":
        return RecordBackend(Transcript(config.transcript_path), live)
    return live


def make_embedder(config: ExperimentConfig):
    name = config.embedding_model
    if name.startswith("local-hash-"):
        return LocalHashEmbedder(dim=int(name.rsplit("-", 1)[1]))
    return HttpEmbeddingProvider(config.base_url, name)


def _embedding_service(config: ExperimentConfig, embedder) -> EmbeddingService:
    cache = EmbeddingCache(config.cache_path) if config.cache_path else None
    return EmbeddingService(provider=embedder, cache=cache)


def _select_instances(split: DatasetSplit, task: str) -> list[LabeledInstance]:
    if task == "extract":
        return [inst for inst in split.instances if inst.label == 1]
    return list(split.instances)


def _retrieve(
    instance: LabeledInstance,
    config: ExperimentConfig,
    repo: Repository | None,
    embeddings: EmbeddingService | None,
    llm: LlmClient,
    catalog: PromptCatalog,
    connective_cache: ConnectiveCache,
) -> RetrievalResult:
    strategy = config.strategy
    if strategy is StrategyKind.ZEROSHOT:
        return zeroshot_result()
    assert repo is not None
    rcfg = config.retrieval_config()
    sid = instance.sentence.id
    text = instance.sentence.raw_text
    if strategy is StrategyKind.RANDOM:
        return retrieve_random(repo, rcfg, salt=sid)
    if strategy is StrategyKind.KNN:
        assert embeddings is not None
        return retrieve_knn(text, repo, embeddings, rcfg)
    connectives = input_connectives(text, llm, catalog, connective_cache, key=sid)
    if strategy is StrategyKind.PATTERN:
        return retrieve_pattern(connectives, repo, rcfg, salt=sid)
    assert embeddings is not None
    return retrieve_knn_pattern(text, connectives, repo, embeddings, rcfg, salt=sid)


def _provenance_json(result: RetrievalResult) -> list[dict]:
    out = []
    for p in result.provenance:
        entry: dict = {"record_id": p.record_id, "origin": p.origin}
        if p.score is not None:
            entry["score"] = round(p.score, 6)
        if p.connective is not None:
            entry["connective"] = p.connective
        out.append(entry)
    return out


def _process_instance(
    instance: LabeledInstance,
    config: ExperimentConfig,
    repo: Repository | None,
    embeddings: EmbeddingService | None,
    llm: LlmClient,
    catalog: PromptCatalog,
    connective_cache: ConnectiveCache,
) -> dict:
    started = time.perf_counter()
    retrieved = _retrieve(instance, config, repo, embeddings, llm, catalog, connective_cache)
    sentence = instance.sentence
    if config.task == "detect":
        prompt = detection_prompt(sentence.raw_text, retrieved, catalog)
    else:
        prompt = extraction_prompt(sentence.raw_text, retrieved, config.single_pair, catalog)
    request = CompletionRequest(
        system_text=prompt.system_text,
        user_text=prompt.user_text,
        model_id=config.model_id,
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
    )
    response = llm.backend.complete(request).text

    parsed: dict | None
    parse_error = False
    if config.task == "detect":
        try:
            parsed = {"label": parse_detection(response).label}
        except UnparseableResponseError:
            parsed = None
            parse_error = True
    else:
        try:
            prediction = parse_extraction(response)
            parsed = {
                "pairs": [{"cause": p.cause, "effect": p.effect} for p in prediction.pairs],
                "overlap_flag": prediction.overlap_flag,
                "dropped_spans": prediction.dropped_spans,
            }
        except UnparseableResponseError:
            parsed = None
            parse_error = True

    elapsed_ms = 0.0 if config.backend == "replay" else (time.perf_counter() - started) * 1000.0
    return {
        "sentence_id": sentence.id,
        "task": config.task,
        "strategy": config.strategy.value,
        "prompt_hash": request_hash(request),
        "example_count": prompt.example_count,
        "fallback_used": retrieved.fallback_used,
        "provenance": _provenance_json(retrieved),
        "response": response,
        "parsed": parsed,
        "parse_error": parse_error,
        "timing_ms": round(elapsed_ms, 3),
    }


def _score(
    config: ExperimentConfig,
    instances: Sequence[LabeledInstance],
    records: dict[str, dict],
    catalog: PromptCatalog,
) -> dict:
    config_echo = {
        "task": config.task,
        "strategy": config.strategy.value,
        "k": config.k,
        "seed": config.seed,
        "matcher": config.matcher,
        "threshold": config.similarity_threshold,
        "catalog_version": catalog.version,
        "model_id": config.model_id,
        "backend": config.backend,
        "single_pair": config.single_pair,
        "matching": config.matching,
    }
    return _score_records(
        config.task, config.single_pair, config.matching, config_echo, instances, records
    )


def _score_records(
    task: str,
    single_pair: bool,
    matching: str,
    config_echo: dict,
    instances: Sequence[LabeledInstance],
    records: dict[str, dict],
) -> dict:
    counts = [records[inst.sentence.id]["example_count"] for inst in instances]
    extras = {
        "examples_mean": round(sum(counts) / len(counts), 4) if counts else 0.0,
        "examples_max": max(counts) if counts else 0,
        "parse_failures": sum(
            1 for inst in instances if records[inst.sentence.id]["parse_error"]
        ),
    }

    if task == "detect":
        preds = []
        for inst in instances:
            record = records[inst.sentence.id]
            if record["parse_error"]:
                # an unanswerable response is scored as a wrong prediction
                predicted = 1 - inst.label
            else:
                predicted = record["parsed"]["label"]
            preds.append((predicted, inst.label))
        report = build_report("detect", detection_metrics(preds), config_echo)
        report["metrics"].update(extras)
        return report

    if single_pair:
        items: list[tuple[str, CauseEffectPair, CauseEffectPair | None]] = []
        for inst in instances:
            record = records[inst.sentence.id]
            predicted = None
            if not record["parse_error"] and record["parsed"]["pairs"]:
                first = record["parsed"]["pairs"][0]
                predicted = CauseEffectPair(first["cause"], first["effect"])
            items.append((inst.sentence.id, inst.sentence.pairs[0], predicted))
        accuracy, outcomes = single_pair_accuracy(items)
        metrics = {
            "accuracy": accuracy,
            "successes": sum(1 for o in outcomes if o.success),
            "total": len(outcomes),
            "overlap_count": sum(1 for o in outcomes if o.overlap_flag),
        }
        report = build_report("extract-single", metrics, config_echo)
        report["metrics"].update(extras)
        return report

    gold: list[Triplet] = []
    predicted: list[Triplet] = []
    for inst in instances:
        gold.extend(sentence_triplets(inst.sentence))
        record = records[inst.sentence.id]
        if not record["parse_error"]:
            for pair in record["parsed"]["pairs"]:
                predicted.append(
                    Triplet(
                        sentence_id=inst.sentence.id,
                        cause=pair["cause"],
                        effect=pair["effect"],
                    )
                )
    metrics = triplet_metrics(gold, predicted, matching=matching)
    report = build_report("extract", metrics, config_echo)
    report["metrics"].update(extras)
    return report


def _existing_ids(path: Path) -> set[str]:
    ids: set[str] = set()
    if not path.exists():
        return ids
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                ids.add(json.loads(line)["sentence_id"])
    return ids


def run_experiment(
    config: ExperimentConfig,
    backend: Backend | None = None,
    embedder=None,
    catalog: PromptCatalog | None = None,
) -> RunResult:
    """Run one experiment; `backend`/`embedder` may be injected for tests.

    Existing output ids are skipped unless config.force; new records are
    appended in sentence-id order. Metrics always cover the full instance
    set (existing records are reloaded and rescored)."""
    catalog = catalog or (
        load_catalog(config.catalog_path) if config.catalog_path else default_catalog()
    )
    split = load_dataset(config.dataset_path, config.dataset_format)
    instances = _select_instances(split, config.task)
    if not instances:
        raise ValueError("no instances to run (extract task needs causal sentences)")
    if config.task == "extract" and config.single_pair:
        multi = [i.sentence.id for i in instances if len(i.sentence.pairs) != 1]
        if multi:
            raise ValueError(f"single_pair needs exactly one gold pair; offending: {multi[:5]}")

    repo = load_repository(config.db_path) if config.db_path else None
    if config.strategy is not StrategyKind.ZEROSHOT and repo is not None and not repo.records:
        raise ValueError("repository is empty")

    llm_backend = backend if backend is not None else make_backend(config)
    llm = LlmClient(
        backend=llm_backend,
        model_id=config.model_id,
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
    )
    needs_embeddings = config.strategy in (StrategyKind.KNN, StrategyKind.KNN_PATTERN)
    embeddings = None
    if needs_embeddings:
        embeddings = _embedding_service(
            config, embedder if embedder is not None else make_embedder(config)
        )
    connective_cache = ConnectiveCache()

    output_path = Path(config.output_path)
    if config.force and output_path.exists():
        output_path.unlink()
    existing = _existing_ids(output_path)
    todo = [inst for inst in instances if inst.sentence.id not in existing]
    todo.sort(key=lambda inst: inst.sentence.id)

    def work(instance: LabeledInstance) -> tuple[dict | None, ProviderError | None]:
        # provider failures are captured, not raised, so records that did
        # complete can still be flushed for resume before aborting
        try:
            record = _process_instance(
                instance, config, repo, embeddings, llm, catalog, connective_cache
            )
            return record, None
        except ProviderError as exc:
            return None, exc

    if config.concurrency == 1 or len(todo) <= 1:
        outcomes = [work(inst) for inst in todo]
    else:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            outcomes = list(pool.map(work, todo))

    fresh = [record for record, _ in outcomes if record is not None]
    failures = [exc for _, exc in outcomes if exc is not None]
    fresh.sort(key=lambda record: record["sentence_id"])
    if fresh:
        output_path.parent.mkdir(parents=True, exist_ok=True)
        with open(output_path, "a", encoding="utf-8") as handle:
            for record in fresh:
                handle.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
    if failures:
        LOGGER.warning(
            "%d of %d instances failed on the provider; %d completed records were kept",
            len(failures), len(todo), len(fresh),
        )
        raise failures[0]

    records: dict[str, dict] = {}
    with open(output_path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                record = json.loads(line)
                records[record["sentence_id"]] = record
    missing = [i.sentence.id for i in instances if i.sentence.id not in records]
    if missing:
        raise ValueError(f"output lacks records for: {missing[:5]}")

    report = _score(config, instances, records, catalog)
    report_path = output_path.with_suffix(output_path.suffix + ".metrics.json")
    report_path.write_text(
        json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    ordered = [records[i.sentence.id] for i in sorted(instances, key=lambda x: x.sentence.id)]
    return RunResult(
        records=ordered,
        report=report,
        output_path=str(output_path),
        skipped_existing=len(existing),
    )


def build_db(
    input_paths: Sequence[str],
    db_path: str,
    model_id: str,
    backend: Backend,
    cap: int = 10,
    seed: int = 0,
    catalog: PromptCatalog | None = None,
    concurrency: int = 1,
    temperature: float = 0.0,
    max_output_tokens: int = 256,
) -> Repository:
    """Merge causal sentences from canonical JSONL datasets and build the DB."""
    corpus = []
    for path in input_paths:
        split = load_dataset(path, "jsonl")
        corpus.extend(split.causal_sentences())
    llm = LlmClient(
        backend=backend,
        model_id=model_id,
        temperature=temperature,
        max_output_tokens=max_output_tokens,
    )
    repo = build_repository(corpus, llm, cap=cap, seed=seed, catalog=catalog, concurrency=concurrency)
    save_repository(repo, db_path)
    return repo


def sweep(
    base_config: ExperimentConfig,
    strategies: Sequence[StrategyKind],
    k_values: Sequence[int],
    csv_path: str,
    backend: Backend | None = None,
    embedder=None,
    catalog: PromptCatalog | None = None,
) -> list[dict]:
    """Run every strategy at every k; emit `strategy,k,metric,value` CSV."""
    if not k_values:
        raise ValueError("sweep needs at least one k value")
    if not strategies:
        raise ValueError("sweep needs at least one strategy")
    reports = []
    rows: list[tuple[str, int, str, object]] = []
    for strategy in strategies:
        for k in k_values:
            out = f"{csv_path}.{strategy.value}.k{k}.jsonl"
            config = replace(base_config, strategy=strategy, k=k, output_path=out)
            result = run_experiment(config, backend=backend, embedder=embedder, catalog=catalog)
            reports.append(result.report)
            for metric, value in sorted(result.report["metrics"].items()):
                if isinstance(value, dict):
                    for sub, subvalue in sorted(value.items()):
                        rows.append((strategy.value, k, f"{metric}.{sub}", subvalue))
                else:
                    rows.append((strategy.value, k, metric, value))
    with open(csv_path, "w", encoding="utf-8", newline="") as handle:
        handle.write("strategy,k,metric,value\n")
        for strategy_name, k, metric, value in rows:
            handle.write(f"{strategy_name},{k},{metric},{value}\n")
    return reports


def eval_predictions(
    predictions_path: str,
    dataset_path: str,
    task: str,
    dataset_format: str = "jsonl",
    single_pair: bool = False,
    matching: str = "greedy",
) -> dict:
    """Re-score an existing prediction file against its dataset."""
    split = load_dataset(dataset_path, dataset_format)
    instances = _select_instances(split, task)
    records: dict[str, dict] = {}
    with open(predictions_path, encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                record = json.loads(line)
                records[record["sentence_id"]] = record
    scored = [inst for inst in instances if inst.sentence.id in records]
    if not scored:
        raise ValueError("no overlapping sentence ids between predictions and dataset")
    sample = records[scored[0].sentence.id]
    config_echo = {
        "task": task,
        "strategy": sample.get("strategy", "zeroshot"),
        "single_pair": single_pair,
        "matching": matching,
        "predictions": predictions_path,
        "scored": len(scored),
        "dataset_total": len(instances),
    }
    return _score_records(task, single_pair, matching, config_echo, scored, records)
