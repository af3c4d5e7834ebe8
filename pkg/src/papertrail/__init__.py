"""papertrail: hybrid retrieval of scientific sources for social media posts.

Lexical BM25 over BPE subwords and exact dense retrieval over unit-norm
embeddings run in parallel; their candidates are merged and re-ranked (or
RRF-fused) into a final top-5, with an evaluation harness for MRR@k and
Success@k.
"""

__version__ = "0.1.0"

from .bm25 import Bm25Params, InvertedIndex, bm25_score, build_inverted_index, lexical_topk
from .bpe import BpeVocab, tokenize, train_bpe
from .corpus import Corpus, Document, Query, QuerySet, doc_text, load_corpus, load_queries
from .dense import (EmbeddingProviderConfig, VectorStore, build_vector_store,
                    embed, hash_embed, semantic_topk)
from .errors import DataError, PapertrailError, ProviderError
from .fusion import (Candidate, RerankerConfig, RrfParams, merge_candidates,
                     overlap_stub_score, rerank, rrf_fuse)
from .metrics import EvalReport, mrr_at_k, reciprocal_rank_at_k, success_at_k
from .normalize import NormalizationConfig, normalize_text
from .pipeline import (RunConfig, run_ablation, run_pipeline,
                       standard_ablation_grid, write_submission)

__all__ = [
    "Bm25Params", "InvertedIndex", "bm25_score", "build_inverted_index", "lexical_topk",
    "BpeVocab", "tokenize", "train_bpe",
    "Corpus", "Document", "Query", "QuerySet", "doc_text", "load_corpus", "load_queries",
    "EmbeddingProviderConfig", "VectorStore", "build_vector_store",
    "embed", "hash_embed", "semantic_topk",
    "DataError", "PapertrailError", "ProviderError",
    "Candidate", "RerankerConfig", "RrfParams", "merge_candidates",
    "overlap_stub_score", "rerank", "rrf_fuse",
    "EvalReport", "mrr_at_k", "reciprocal_rank_at_k", "success_at_k",
    "NormalizationConfig", "normalize_text",
    "RunConfig", "run_ablation", "run_pipeline", "standard_ablation_grid",
    "write_submission",
]
