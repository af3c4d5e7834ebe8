"""Candidate fusion and re-ranking.

The lexical and semantic branches each emit ranked candidates; merging takes
the union by doc_id (a document found by both branches keeps both ranks).
The merged set is then either re-scored from scratch by a pairwise re-ranker
(service mode or the deterministic token-overlap stub) or combined with
reciprocal rank fusion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .bpe import BpeVocab, tokenize
from .corpus import Corpus, Document, doc_text
from .errors import DataError, ProviderError
from .normalize import NormalizationConfig, DEFAULT_NORMALIZATION
from .service import post_json

SOURCES = ("lexical", "semantic")


@dataclass(frozen=True)
class Candidate:
    doc_id: str
    sources: frozenset[str]
    lexical_rank: int | None = None
    semantic_rank: int | None = None
    lexical_score: float | None = None
    semantic_score: float | None = None

    def __post_init__(self):
        if not self.sources:
            raise ValueError(f"candidate {self.doc_id!r} has no sources")
        if not self.sources <= set(SOURCES):
            raise ValueError(f"unknown sources {self.sources!r}")
        for source, rank in (("lexical", self.lexical_rank),
                             ("semantic", self.semantic_rank)):
            if (source in self.sources) != (rank is not None):
                raise ValueError(
                    f"candidate {self.doc_id!r}: source {source!r} and its rank "
                    "must be present together")
            if rank is not None and rank < 1:
                raise ValueError(f"candidate {self.doc_id!r}: rank {rank} < 1")


@dataclass(frozen=True)
class RrfParams:
    rank_constant: float = 20.0
    window: int = 100

    def __post_init__(self):
        if self.rank_constant <= 0:
            raise ValueError(f"rank_constant must be > 0, got {self.rank_constant}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")


@dataclass(frozen=True)
class RerankerConfig:
    mode: str = "overlap_stub"
    endpoint: str | None = None
    batch_size: int = 16

    def __post_init__(self):
        if self.mode not in ("service", "overlap_stub"):
            raise ValueError(f"unknown reranker mode: {self.mode!r}")
        if self.mode == "service" and not self.endpoint:
            raise ValueError("service reranker requires an endpoint")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def merge_candidates(lex: list[Candidate], sem: list[Candidate]) -> list[Candidate]:
    """Union by doc_id; semantic-ranked docs first, then lexical-only docs.

    Downstream re-ranking ignores this ordering; it only fixes iteration
    order for determinism.
    """
    for name, branch in (("lexical", lex), ("semantic", sem)):
        ids = [c.doc_id for c in branch]
        if len(set(ids)) != len(ids):
            raise DataError(f"duplicate doc_id within the {name} branch")

    by_id: dict[str, Candidate] = {c.doc_id: c for c in sem}
    lex_only: list[Candidate] = []
    for c in lex:
        existing = by_id.get(c.doc_id)
        if existing is None:
            lex_only.append(c)
        else:
            by_id[c.doc_id] = Candidate(
                doc_id=c.doc_id,
                sources=existing.sources | c.sources,
                lexical_rank=c.lexical_rank,
                semantic_rank=existing.semantic_rank,
                lexical_score=c.lexical_score,
                semantic_score=existing.semantic_score,
            )
    merged = sorted(by_id.values(), key=lambda c: c.semantic_rank)
    merged.extend(sorted(lex_only, key=lambda c: c.lexical_rank))
    return merged


def overlap_stub_score(query_text: str, doc: Document,
                       vocab: BpeVocab,
                       cfg: NormalizationConfig = DEFAULT_NORMALIZATION) -> float:
    """Deterministic stand-in scorer: query-token coverage of the document.

    |query tokens ∩ doc tokens| / |query tokens| over BPE token sets; 0 for
    an empty query.
    """
    query_tokens = set(tokenize(query_text, vocab, cfg))
    if not query_tokens:
        return 0.0
    doc_tokens = set(tokenize(doc_text(doc), vocab, cfg))
    return len(query_tokens & doc_tokens) / len(query_tokens)


def _service_scores(cfg: RerankerConfig, query_text: str,
                    pairs: list[tuple[str, str]]) -> list[float]:
    scores: list[float] = []
    for start in range(0, len(pairs), cfg.batch_size):
        chunk = pairs[start:start + cfg.batch_size]
        resp = post_json(cfg.endpoint.rstrip("/") + "/rerank", {
            "query": query_text,
            "candidates": [{"id": doc_id, "text": text} for doc_id, text in chunk],
        })
        chunk_scores = resp.get("scores")
        if not isinstance(chunk_scores, list) or len(chunk_scores) != len(chunk):
            got = len(chunk_scores) if isinstance(chunk_scores, list) else "none"
            raise ProviderError(
                f"re-rank score count mismatch: sent {len(chunk)}, got {got}")
        for s in chunk_scores:
            value = float(s)
            if not math.isfinite(value):
                raise ProviderError("re-ranker returned a non-finite score")
            scores.append(value)
    return scores


def rerank(cfg: RerankerConfig, query_text: str, candidates: list[Candidate],
           corpus: Corpus, top_n: int = 5, *,
           vocab: BpeVocab | None = None,
           norm: NormalizationConfig = DEFAULT_NORMALIZATION) -> list[tuple[str, float]]:
    """Score every candidate from scratch on (query, doc text); keep top_n.

    Branch ranks and scores are ignored; ordering depends only on the
    scorer's output, with ties broken by doc_id ascending.
    """
    if top_n < 0:
        raise ValueError("top_n must be >= 0")
    docs = [corpus.get(c.doc_id) for c in candidates]
    if cfg.mode == "overlap_stub":
        if vocab is None:
            raise ValueError("overlap_stub reranker requires a BPE vocab")
        scores = [overlap_stub_score(query_text, d, vocab, norm) for d in docs]
    else:
        pairs = [(d.doc_id, doc_text(d)) for d in docs]
        scores = _service_scores(cfg, query_text, pairs)
    ranked = sorted(zip((d.doc_id for d in docs), scores),
                    key=lambda item: (-item[1], item[0]))
    return ranked[:top_n]


def rrf_fuse(lists: list[list[str]], params: RrfParams = RrfParams()) -> list[tuple[str, float]]:
    """Reciprocal rank fusion: score(d) = sum of 1 / (rank_constant + rank).

    Ranks are 1-based; entries beyond rank `window` in a list contribute
    nothing. Output is sorted by score descending, ties by doc_id ascending.
    """
    for i, ranked in enumerate(lists):
        if len(set(ranked)) != len(ranked):
            raise DataError(f"duplicate doc_id within fused list {i}")
    scores: dict[str, float] = {}
    for ranked in lists:
        for rank, doc_id in enumerate(ranked, start=1):
            if rank > params.window:
                break
            scores[doc_id] = scores.get(doc_id, 0.0) + 1.0 / (params.rank_constant + rank)
    return sorted(scores.items(), key=lambda item: (-item[1], item[0]))
