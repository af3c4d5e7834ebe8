"""Model backends behind the HTTP surface.

A backend pair is selected by spec string at startup:

  "hash:<dim>"        deterministic token-hashing stand-in, no model files;
                      used for contract tests and offline development
  any other string    a checkpoint path or hub id loaded through
                      sentence-transformers / FlagEmbedding (the `models`
                      extra); embeddings are L2-normalized, queries get the
                      configured instruction prefix

Responses are order-aligned with requests in every backend; fingerprints are
stable for a fixed checkpoint.
"""

from __future__ import annotations

import hashlib

import numpy as np

MAX_TOKENS = 8192


class OverlongInputError(ValueError):
    def __init__(self, position: int, token_count: int, limit: int):
        super().__init__(
            f"text at position {position} has {token_count} tokens, "
            f"exceeding the {limit}-token limit")
        self.position = position
        self.token_count = token_count
        self.limit = limit


def _check_lengths(backend, texts: list[str]) -> None:
    for i, text in enumerate(texts):
        count = backend.count_tokens(text)
        if count > backend.max_tokens:
            raise OverlongInputError(i, count, backend.max_tokens)


def _char_ngrams(text: str, n: int = 3):
    padded = f" {text.lower()} "
    if len(padded) < n:
        yield padded
        return
    for i in range(len(padded) - n + 1):
        yield padded[i:i + n]


def _hash_vector(text: str, dim: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=np.float64)
    for gram in _char_ngrams(text):
        digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
        vec[int.from_bytes(digest, "little") % dim] += 1.0
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return vec / norm


class HashEmbeddingBackend:
    """Character-3-gram hashing embedder; deterministic and model-free."""

    def __init__(self, dim: int = 384, query_prefix: str = "query: ",
                 max_tokens: int = MAX_TOKENS):
        self.dim = dim
        self.query_prefix = query_prefix
        self.max_tokens = max_tokens
        self.fingerprint = f"hash-embedder:v1:dim={dim}"

    def count_tokens(self, text: str) -> int:
        return len(text.split())

    def embed(self, texts: list[str], role: str) -> np.ndarray:
        _check_lengths(self, texts)
        prefix = self.query_prefix if role == "query" else ""
        return np.stack([_hash_vector(prefix + t, self.dim) for t in texts])


class HashRerankBackend:
    """Scores candidates by 3-gram cosine against the query; deterministic."""

    def __init__(self, dim: int = 512, max_tokens: int = MAX_TOKENS):
        self.dim = dim
        self.max_tokens = max_tokens
        self.fingerprint = f"hash-reranker:v1:dim={dim}"

    def count_tokens(self, text: str) -> int:
        return len(text.split())

    def score(self, query: str, texts: list[str]) -> list[float]:
        _check_lengths(self, [query] + texts)
        qv = _hash_vector(query, self.dim)
        return [float(np.dot(qv, _hash_vector(t, self.dim))) for t in texts]


class SentenceTransformerEmbedder:
    """Real retriever checkpoint (e.g. the fine-tuned INF-Retriever-v1).

    Loaded lazily through sentence-transformers; embeddings are normalized
    and the instruction prefix is applied to queries only. Inputs over the
    token limit are rejected, never truncated.
    """

    def __init__(self, checkpoint: str, query_prefix: str = "", device: str | None = None,
                 max_tokens: int = MAX_TOKENS):
        from sentence_transformers import SentenceTransformer
        self.model = SentenceTransformer(checkpoint, device=device)
        self.model.max_seq_length = max_tokens
        self.dim = self.model.get_sentence_embedding_dimension()
        self.query_prefix = query_prefix
        self.max_tokens = max_tokens
        self.fingerprint = f"st:{checkpoint}"

    def count_tokens(self, text: str) -> int:
        return len(self.model.tokenizer(text, add_special_tokens=True)["input_ids"])

    def embed(self, texts: list[str], role: str) -> np.ndarray:
        _check_lengths(self, texts)
        prefix = self.query_prefix if role == "query" else ""
        out = self.model.encode([prefix + t for t in texts],
                                normalize_embeddings=True,
                                convert_to_numpy=True)
        return np.asarray(out, dtype=np.float64)


class LlmRerankBackend:
    """LLM-based cross-encoder checkpoint (e.g. bge-reranker-v2-gemma)."""

    def __init__(self, checkpoint: str, device: str | None = None,
                 max_tokens: int = MAX_TOKENS):
        from FlagEmbedding import FlagLLMReranker
        self.model = FlagLLMReranker(checkpoint, use_fp16=True, devices=device)
        self.max_tokens = max_tokens
        self.fingerprint = f"flag-llm:{checkpoint}"

    def count_tokens(self, text: str) -> int:
        return len(self.model.tokenizer(text, add_special_tokens=True)["input_ids"])

    def score(self, query: str, texts: list[str]) -> list[float]:
        _check_lengths(self, [query] + texts)
        scores = self.model.compute_score([[query, t] for t in texts])
        if not isinstance(scores, list):
            scores = [scores]
        return [float(s) for s in scores]


def build_embedder(spec: str, query_prefix: str, device: str | None,
                   max_tokens: int = MAX_TOKENS):
    if spec.startswith("hash"):
        dim = int(spec.split(":", 1)[1]) if ":" in spec else 384
        return HashEmbeddingBackend(dim=dim, query_prefix=query_prefix,
                                    max_tokens=max_tokens)
    return SentenceTransformerEmbedder(spec, query_prefix=query_prefix,
                                       device=device, max_tokens=max_tokens)


def build_reranker(spec: str, device: str | None, max_tokens: int = MAX_TOKENS):
    if spec.startswith("hash"):
        dim = int(spec.split(":", 1)[1]) if ":" in spec else 512
        return HashRerankBackend(dim=dim, max_tokens=max_tokens)
    return LlmRerankBackend(spec, device=device, max_tokens=max_tokens)
