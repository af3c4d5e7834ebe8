"""End-to-end retrieval runs, the ablation driver, and the submission writer.

A run is fully described by a RunConfig; equal configs plus equal inputs give
byte-identical outputs. The pipeline shape follows the shipped system:
lexical top-30 and semantic top-100 in parallel, union-merge, then either
cross-encoder-style re-ranking or reciprocal rank fusion, keeping the top 5.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict, replace

from pathlib import Path

from . import augment as augment_mod
from .augment import AugmentedStore, GenerationProviderConfig, Generator, build_augmented_store
from .bm25 import Bm25Params, InvertedIndex, build_inverted_index, lexical_topk
from .bpe import BpeVocab, train_bpe
from .corpus import Corpus, QuerySet, doc_text
from .dense import (EmbeddingProviderConfig, VectorStore, build_vector_store,
                    embed, semantic_topk)
from .errors import DataError, PapertrailError
from .fusion import RerankerConfig, RrfParams, merge_candidates, rerank, rrf_fuse
from .metrics import EvalReport, build_report
from .normalize import NormalizationConfig, normalize_text

PIPELINE_MODES = ("lexical", "semantic", "rrf", "rerank")


@dataclass(frozen=True)
class RunConfig:
    """Every tunable of every stage; flat so it maps 1:1 onto config files."""

    # normalization
    lowercase: bool = True
    strip_punctuation: bool = True
    preserved_symbols: str = "%"
    hashtag_policy: str = "strip_marker"
    strip_urls: bool = True
    # lexical
    vocab_size: int = 30_000
    k1: float = 1.5
    b: float = 0.75
    lex_k: int = 30
    # dense
    embedding_mode: str = "hash_test"
    embedding_endpoint: str | None = None
    embedding_path: str | None = None
    embedding_dim: int = 256
    sem_k: int = 100
    # fusion
    mode: str = "rerank"
    top_n: int = 5
    reranker_mode: str = "overlap_stub"
    reranker_endpoint: str | None = None
    reranker_batch_size: int = 16
    rrf_constant: float = 20.0
    rrf_window: int = 100
    # augmentation
    augment: str = "none"
    generation_mode: str = "canned"
    generation_endpoint: str | None = None
    generation_fixture_path: str | None = None

    def __post_init__(self):
        if self.mode not in PIPELINE_MODES:
            raise ValueError(f"unknown pipeline mode: {self.mode!r}")
        if self.augment not in augment_mod.AUGMENT_MODES:
            raise ValueError(f"unknown augmentation mode: {self.augment!r}")

    def normalization(self) -> NormalizationConfig:
        return NormalizationConfig(
            lowercase=self.lowercase,
            strip_punctuation=self.strip_punctuation,
            preserved_symbols=frozenset(self.preserved_symbols),
            hashtag_policy=self.hashtag_policy,
            strip_urls=self.strip_urls,
        )

    def bm25_params(self) -> Bm25Params:
        return Bm25Params(k1=self.k1, b=self.b)

    def rrf_params(self) -> RrfParams:
        return RrfParams(rank_constant=self.rrf_constant, window=self.rrf_window)

    def reranker(self) -> RerankerConfig:
        return RerankerConfig(mode=self.reranker_mode,
                              endpoint=self.reranker_endpoint,
                              batch_size=self.reranker_batch_size)

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


@dataclass
class Artifacts:
    """Built once per corpus + config and shared across queries."""

    corpus: Corpus
    vocab: BpeVocab
    index: InvertedIndex
    store: VectorStore | None
    augmented_store: AugmentedStore | None
    embedding_provider: EmbeddingProviderConfig
    generator: Generator | None


def embedding_provider_from(cfg: RunConfig, vocab: BpeVocab | None) -> EmbeddingProviderConfig:
    if cfg.embedding_mode == "hash_test":
        return EmbeddingProviderConfig(mode="hash_test", dim=cfg.embedding_dim,
                                       vocab=vocab, norm=cfg.normalization())
    if cfg.embedding_mode == "file":
        return EmbeddingProviderConfig(mode="file", path=cfg.embedding_path,
                                       dim=cfg.embedding_dim or None)
    return EmbeddingProviderConfig(mode="service", endpoint=cfg.embedding_endpoint,
                                   dim=cfg.embedding_dim or None)


def build_artifacts(cfg: RunConfig, corpus: Corpus, *,
                    vocab: BpeVocab | None = None,
                    index: InvertedIndex | None = None,
                    store: VectorStore | None = None,
                    with_store: bool | None = None) -> Artifacts:
    """Train the tokenizer and build both indexes; prebuilt pieces are reused.

    with_store=False skips the vector side (lexical-only runs).
    """
    norm = cfg.normalization()
    if vocab is None:
        if index is not None:
            vocab = index.vocab
        else:
            texts = [normalize_text(doc_text(d), norm) for d in corpus.documents]
            vocab = train_bpe(texts, cfg.vocab_size)
    if index is None:
        index = build_inverted_index(corpus, vocab, cfg.bm25_params(), norm)
    provider = embedding_provider_from(cfg, vocab)

    generator = None
    if cfg.augment != "none":
        generator = Generator(GenerationProviderConfig(
            mode=cfg.generation_mode,
            endpoint=cfg.generation_endpoint,
            fixture_path=cfg.generation_fixture_path))

    if with_store is None:
        with_store = cfg.mode != "lexical"
    augmented = None
    if with_store and cfg.augment == "ad":
        augmented = build_augmented_store(corpus, generator, provider)
        store = None
    elif with_store and store is None:
        store = build_vector_store(corpus, provider)
    return Artifacts(corpus=corpus, vocab=vocab, index=index, store=store,
                     augmented_store=augmented, embedding_provider=provider,
                     generator=generator)


@dataclass
class PipelineRun:
    results: list[tuple[str, list[tuple[str, float]]]]
    report: EvalReport | None
    config_fingerprint: str

    def ranked_ids(self) -> list[list[str]]:
        return [[doc_id for doc_id, _score in ranked] for _qid, ranked in self.results]


def _lexical_query_text(cfg: RunConfig, artifacts: Artifacts, tweet: str) -> str:
    if cfg.augment == "rewrite":
        return augment_mod.rewrite_query(artifacts.generator, tweet)
    if cfg.augment == "expand":
        return augment_mod.expand_query(artifacts.generator, tweet)
    return tweet


def _semantic_query_vector(cfg: RunConfig, artifacts: Artifacts, tweet: str):
    if cfg.augment == "hyde":
        # The hypothetical document stands in for the query and is encoded
        # with the document convention so it lives in the document manifold.
        text = augment_mod.hyde_document(artifacts.generator, tweet)
        role = "document"
    else:
        text, role = tweet, "query"
    return embed(artifacts.embedding_provider, [text], role)[0]


def _semantic_branch(cfg: RunConfig, artifacts: Artifacts, tweet: str, k: int):
    qvec = _semantic_query_vector(cfg, artifacts, tweet)
    if artifacts.augmented_store is not None:
        return artifacts.augmented_store.topk(qvec, k)
    return semantic_topk(artifacts.store, qvec, k)


def run_query(cfg: RunConfig, artifacts: Artifacts, tweet: str,
              branch_depth: int | None = None
              ) -> tuple[list[tuple[str, float]], set[str] | None]:
    """One query through the configured pipeline shape.

    Returns the ranked (doc_id, score) list and, for fused modes, the set of
    candidate ids that entered fusion (None for branch-only modes).
    """
    if cfg.mode == "lexical":
        lex = lexical_topk(artifacts.index,
                           _lexical_query_text(cfg, artifacts, tweet),
                           branch_depth or cfg.lex_k)
        return [(c.doc_id, c.lexical_score) for c in lex], None
    if cfg.mode == "semantic":
        sem = _semantic_branch(cfg, artifacts, tweet, branch_depth or cfg.sem_k)
        return [(c.doc_id, c.semantic_score) for c in sem], None

    lex = lexical_topk(artifacts.index,
                       _lexical_query_text(cfg, artifacts, tweet), cfg.lex_k)
    sem = _semantic_branch(cfg, artifacts, tweet, cfg.sem_k)
    candidate_ids = {c.doc_id for c in lex} | {c.doc_id for c in sem}

    if cfg.mode == "rrf":
        fused = rrf_fuse([[c.doc_id for c in lex], [c.doc_id for c in sem]],
                         cfg.rrf_params())
        return fused[:cfg.top_n], candidate_ids

    merged = merge_candidates(lex, sem)
    ranked = rerank(cfg.reranker(), tweet, merged, artifacts.corpus, cfg.top_n,
                    vocab=artifacts.vocab, norm=artifacts.index.normalization)
    return ranked, candidate_ids


def run_pipeline(cfg: RunConfig, corpus: Corpus, queries: QuerySet, *,
                 artifacts: Artifacts | None = None,
                 mrr_ks: tuple[int, ...] = (1, 5),
                 success_ks: tuple[int, ...] = (30, 100),
                 label: str = "") -> PipelineRun:
    """Run retrieval for every query; attach an EvalReport when golds exist.

    Any per-query failure aborts the whole run, naming the query.
    """
    if artifacts is None:
        artifacts = build_artifacts(cfg, corpus)

    branch_depth = max(success_ks) if cfg.mode in ("lexical", "semantic") else None
    results: list[tuple[str, list[tuple[str, float]]]] = []
    candidate_hits: list[bool] = []
    for q in queries.queries:
        try:
            ranked, candidate_ids = run_query(cfg, artifacts, q.text, branch_depth)
        except PapertrailError as exc:
            raise type(exc)(f"query {q.query_id!r}: {exc}") from exc
        results.append((q.query_id, ranked))
        if candidate_ids is not None and q.gold_doc_id is not None:
            candidate_hits.append(q.gold_doc_id in candidate_ids)

    report = None
    if queries.has_gold:
        golds = [q.gold_doc_id for q in queries.queries]
        if cfg.mode in ("rrf", "rerank"):
            success_ks_used = tuple(sorted({1, cfg.top_n}))
            cand = sum(candidate_hits) / len(candidate_hits)
        else:
            success_ks_used = success_ks
            cand = None
        report = build_report(
            [q.query_id for q in queries.queries],
            [[doc_id for doc_id, _s in ranked] for _qid, ranked in results],
            golds, cfg.fingerprint(), mrr_ks=mrr_ks, success_ks=success_ks_used,
            candidate_success=cand, label=label or cfg.mode)
    return PipelineRun(results=results, report=report,
                       config_fingerprint=cfg.fingerprint())


def standard_ablation_grid(base: RunConfig) -> list[tuple[str, RunConfig]]:
    """The four shipped configurations: each branch alone, RRF, full re-rank."""
    return [
        ("lexical", replace(base, mode="lexical")),
        ("semantic", replace(base, mode="semantic")),
        ("rrf", replace(base, mode="rrf")),
        ("rerank", replace(base, mode="rerank")),
    ]


def run_ablation(cfg_grid: list[tuple[str, RunConfig]], corpus: Corpus,
                 queries: QuerySet, *,
                 mrr_ks: tuple[int, ...] = (1, 5),
                 success_ks: tuple[int, ...] = (30, 100)) -> list[EvalReport]:
    """One report per grid row, in declared grid order (never re-sorted)."""
    if not queries.has_gold:
        raise DataError("ablation requires gold doc_ids on every query")

    def artifact_key(cfg: RunConfig) -> tuple:
        return (cfg.vocab_size, cfg.k1, cfg.b, cfg.normalization(),
                cfg.embedding_mode, cfg.embedding_endpoint, cfg.embedding_path,
                cfg.embedding_dim, cfg.augment, cfg.generation_mode,
                cfg.generation_endpoint, cfg.generation_fixture_path)

    needs_store = {}
    for _label, cfg in cfg_grid:
        key = artifact_key(cfg)
        needs_store[key] = needs_store.get(key, False) or cfg.mode != "lexical"

    reports = []
    cache: dict[tuple, Artifacts] = {}
    for label, cfg in cfg_grid:
        key = artifact_key(cfg)
        artifacts = cache.get(key)
        if artifacts is None:
            artifacts = build_artifacts(cfg, corpus, with_store=needs_store[key])
            cache[key] = artifacts
        run = run_pipeline(cfg, corpus, queries, artifacts=artifacts,
                           mrr_ks=mrr_ks, success_ks=success_ks, label=label)
        reports.append(run.report)
    return reports


def write_submission(results: list[tuple[str, list[str]]], path: str | Path) -> None:
    """CLEF-style TSV: post_id, then the bracketed top-5 prediction list."""
    if not results:
        raise DataError("no results to write")
    for qid, preds in results:
        if not preds:
            raise DataError(f"query {qid!r} has no predictions")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("post_id\tpreds\n")
        for qid, preds in results:
            f.write(f"{qid}\t{preds!r}\n")
