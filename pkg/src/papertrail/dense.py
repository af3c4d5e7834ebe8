"""Dense retrieval: embedding providers, the exact-scan vector store, top-k.

Every vector entering the store is unit-norm, so cosine similarity reduces to
a dot product and the scan is an exact matrix-vector product over the whole
corpus (no approximate structures). Three providers exist: `service` talks to
the model server, `file` replays precomputed vectors, `hash_test` is a
deterministic token-hashing stand-in that lets the full pipeline run offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bpe import BpeVocab, EMPTY_VOCAB, tokenize
from .corpus import Corpus, doc_text
from .errors import DataError, ProviderError
from .fusion import Candidate
from .normalize import NormalizationConfig, DEFAULT_NORMALIZATION
from .service import get_json, post_json

logger = logging.getLogger(__name__)

VEC_MAGIC = b"PTVEC"
VEC_FORMAT_VERSION = 1

NORM_TOLERANCE = 1e-6
NORM_HARD_LIMIT = 1e-3

PROVIDER_MODES = ("service", "file", "hash_test")


@dataclass(frozen=True)
class EmbeddingProviderConfig:
    """Exactly one mode's parameters are populated.

    hash_test additionally accepts the BPE vocab and normalization config of
    the lexical side so the stand-in shares the pipeline's tokenization.
    """

    mode: str
    endpoint: str | None = None
    path: str | Path | None = None
    dim: int | None = None
    vocab: BpeVocab | None = None
    norm: NormalizationConfig | None = None

    def __post_init__(self):
        if self.mode not in PROVIDER_MODES:
            raise ValueError(f"unknown embedding provider mode: {self.mode!r}")
        if self.mode == "service" and not self.endpoint:
            raise ValueError("service provider requires an endpoint")
        if self.mode == "file" and not self.path:
            raise ValueError("file provider requires a path")
        if self.mode == "hash_test" and (self.dim is None or self.dim < 2):
            raise ValueError("hash_test provider requires dim >= 2")
        if self.mode != "service" and self.endpoint:
            raise ValueError(f"endpoint is only valid in service mode")
        if self.mode != "file" and self.path:
            raise ValueError(f"path is only valid in file mode")


@dataclass
class VectorStore:
    doc_ids: list[str]
    matrix: np.ndarray
    dim: int
    provider_fingerprint: str

    def __post_init__(self):
        if self.matrix.shape != (len(self.doc_ids), self.dim):
            raise DataError(
                f"store shape {self.matrix.shape} does not match "
                f"{len(self.doc_ids)} ids x dim {self.dim}")
        if len(set(self.doc_ids)) != len(self.doc_ids):
            raise DataError("duplicate doc_id in vector store")
        norms = np.linalg.norm(self.matrix, axis=1)
        if len(norms) and np.max(np.abs(norms - 1.0)) > NORM_TOLERANCE:
            raise DataError("vector store rows must be unit-norm")


def _bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def hash_embed(text: str, dim: int, vocab: BpeVocab = EMPTY_VOCAB,
               cfg: NormalizationConfig = DEFAULT_NORMALIZATION) -> np.ndarray:
    """Token-count embedding hashed into dim buckets, L2-normalized.

    Pure function of its arguments; an empty token list maps to the unit
    vector along bucket 0.
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text, vocab, cfg):
        vec[_bucket(token, dim)] += 1.0
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return vec / norm


def _check_and_normalize(vectors: np.ndarray, source: str) -> np.ndarray:
    if not np.all(np.isfinite(vectors)):
        raise ProviderError(f"{source} returned non-finite embedding values")
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(norms == 0.0):
        raise ProviderError(f"{source} returned a zero vector")
    deviation = np.max(np.abs(norms - 1.0))
    if deviation > NORM_HARD_LIMIT:
        raise ProviderError(
            f"{source} vectors deviate from unit norm by {deviation:.2e} "
            f"(limit {NORM_HARD_LIMIT:.0e}); wrong model or protocol?")
    if deviation > NORM_TOLERANCE:
        logger.warning("%s vectors off unit norm by %.2e; re-normalizing locally",
                       source, deviation)
        vectors = vectors / norms[:, None]
    return vectors


_VECTOR_FILE_CACHE: dict[tuple[str, int, int], tuple[dict[str, np.ndarray], int, str]] = {}


def _load_vector_file(path: str | Path) -> tuple[dict[str, np.ndarray], int, str]:
    try:
        stat = os.stat(path)
    except OSError as exc:
        raise DataError(f"cannot read vector file {path}: {exc}") from exc
    cache_key = (str(Path(path).resolve()), stat.st_mtime_ns, stat.st_size)
    cached = _VECTOR_FILE_CACHE.get(cache_key)
    if cached is not None:
        return cached
    blob = Path(path).read_bytes()
    if blob[: len(VEC_MAGIC)] != VEC_MAGIC:
        raise DataError(f"{path} is not a vector file (bad magic)")
    version = blob[len(VEC_MAGIC)]
    if version != VEC_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported vector format version {version}")
    offset = len(VEC_MAGIC) + 1
    (header_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    header = json.loads(blob[offset:offset + header_len].decode("utf-8"))
    offset += header_len
    dim = int(header["dim"])
    count = int(header["count"])
    fingerprint = str(header["provider_fingerprint"])
    rows: dict[str, np.ndarray] = {}
    for _ in range(count):
        (id_len,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        key = blob[offset:offset + id_len].decode("utf-8")
        offset += id_len
        vec = np.frombuffer(blob, dtype="<f4", count=dim, offset=offset).astype(np.float64)
        offset += dim * 4
        rows[key] = vec
    _VECTOR_FILE_CACHE.clear()
    _VECTOR_FILE_CACHE[cache_key] = (rows, dim, fingerprint)
    return rows, dim, fingerprint


def save_vector_file(path: str | Path, keys: list[str], matrix: np.ndarray,
                     provider_fingerprint: str) -> None:
    """Header {dim, count, provider_fingerprint}, then per-row key + f32 LE."""
    dim = matrix.shape[1]
    header = json.dumps({"dim": dim, "count": len(keys),
                         "provider_fingerprint": provider_fingerprint},
                        sort_keys=True).encode("utf-8")
    parts = [VEC_MAGIC, bytes([VEC_FORMAT_VERSION]), struct.pack("<I", len(header)), header]
    for key, row in zip(keys, matrix):
        kb = key.encode("utf-8")
        parts.append(struct.pack("<H", len(kb)))
        parts.append(kb)
        parts.append(row.astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def text_key(text: str) -> str:
    """Lookup key for file-mode vectors of free text (e.g. queries)."""
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


def provider_fingerprint(provider: EmbeddingProviderConfig) -> str:
    if provider.mode == "hash_test":
        vocab_fp = (provider.vocab or EMPTY_VOCAB).fingerprint()
        return f"hash_test:dim={provider.dim}:vocab={vocab_fp[:16]}"
    if provider.mode == "file":
        _rows, _dim, fp = _load_vector_file(provider.path)
        return fp
    health = get_json(provider.endpoint.rstrip("/") + "/health")
    embedder = health.get("embedder")
    if isinstance(embedder, dict) and embedder.get("fingerprint"):
        return str(embedder["fingerprint"])
    raise ProviderError(
        f"{provider.endpoint}/health did not report an embedder fingerprint")


def embed(provider: EmbeddingProviderConfig, texts: list[str], role: str,
          keys: list[str] | None = None) -> np.ndarray:
    """Embed texts through the configured provider; rows are unit-norm.

    role is "query" or "document" and is forwarded to service providers
    (instruction-prefixed models encode the two differently). In file mode,
    rows are looked up by the explicit keys when given (document ids during a
    store build) or by text digest otherwise.
    """
    if role not in ("query", "document"):
        raise ValueError(f"unknown role: {role!r}")
    if not texts:
        raise ValueError("texts must be non-empty")
    if keys is not None and len(keys) != len(texts):
        raise ValueError("keys must align with texts")

    if provider.mode == "hash_test":
        vocab = provider.vocab or EMPTY_VOCAB
        cfg = provider.norm or DEFAULT_NORMALIZATION
        matrix = np.stack([hash_embed(t, provider.dim, vocab, cfg) for t in texts])
        return matrix

    if provider.mode == "file":
        rows, dim, _fp = _load_vector_file(provider.path)
        if provider.dim is not None and dim != provider.dim:
            raise ProviderError(
                f"vector file dim {dim} does not match expected {provider.dim}")
        out = np.empty((len(texts), dim), dtype=np.float64)
        for i, text in enumerate(texts):
            key = keys[i] if keys is not None else text_key(text)
            row = rows.get(key)
            if row is None:
                raise ProviderError(f"vector file is missing an entry for {key!r}")
            out[i] = row
        return _check_and_normalize(out, f"vector file {provider.path}")

    # service mode
    resp = post_json(provider.endpoint.rstrip("/") + "/embed",
                     {"texts": texts, "role": role})
    vectors = resp.get("vectors")
    if not isinstance(vectors, list) or len(vectors) != len(texts):
        got = len(vectors) if isinstance(vectors, list) else "none"
        raise ProviderError(f"embed count mismatch: sent {len(texts)}, got {got}")
    matrix = np.asarray(vectors, dtype=np.float64)
    if matrix.ndim != 2:
        raise ProviderError("embedding service returned ragged vectors")
    if provider.dim is not None and matrix.shape[1] != provider.dim:
        raise ProviderError(
            f"embedding dimension mismatch: expected {provider.dim}, "
            f"got {matrix.shape[1]}")
    return _check_and_normalize(matrix, f"embedding service {provider.endpoint}")


def build_vector_store(corpus: Corpus, provider: EmbeddingProviderConfig,
                       batch_size: int = 64) -> VectorStore:
    """One row per document, aligned with corpus order; whole-document text
    (no chunking)."""
    doc_ids = [d.doc_id for d in corpus.documents]
    texts = [doc_text(d) for d in corpus.documents]
    fingerprint = provider_fingerprint(provider)
    chunks = []
    for start in range(0, len(texts), batch_size):
        chunks.append(embed(provider, texts[start:start + batch_size], "document",
                            keys=doc_ids[start:start + batch_size]))
    matrix = np.vstack(chunks)
    return VectorStore(doc_ids=doc_ids, matrix=matrix, dim=matrix.shape[1],
                       provider_fingerprint=fingerprint)


def exact_scan_scores(matrix: np.ndarray, query_vec: np.ndarray) -> list[float]:
    """Per-row dot products.

    Scored row by row rather than as one matrix product: blocked BLAS gemv
    kernels can give bitwise-identical rows different last-ulp scores
    depending on row position, which would corrupt the doc_id tie-break.
    """
    return [float(np.dot(row, query_vec)) for row in matrix]


def semantic_topk(store: VectorStore, query_vec: np.ndarray, k: int = 100) -> list[Candidate]:
    """Exact scan: min(k, |docs|) candidates by dot product desc, doc_id asc."""
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if query_vec.shape != (store.dim,):
        raise DataError(
            f"query vector shape {query_vec.shape} does not match store dim {store.dim}")
    if k <= 0:
        return []
    scores = exact_scan_scores(store.matrix, query_vec)
    order = sorted(range(len(store.doc_ids)),
                   key=lambda i: (-scores[i], store.doc_ids[i]))
    return [
        Candidate(doc_id=store.doc_ids[i], sources=frozenset({"semantic"}),
                  semantic_rank=rank, semantic_score=scores[i])
        for rank, i in enumerate(order[:k], start=1)
    ]


def save_store(store: VectorStore, path: str | Path) -> None:
    save_vector_file(path, store.doc_ids, store.matrix, store.provider_fingerprint)


def load_store(path: str | Path) -> VectorStore:
    rows, dim, fingerprint = _load_vector_file(path)
    doc_ids = list(rows.keys())
    if not doc_ids:
        raise DataError(f"{path}: empty vector store")
    matrix = np.stack([rows[i] for i in doc_ids])
    matrix = _check_and_normalize(matrix, f"vector store {path}")
    return VectorStore(doc_ids=doc_ids, matrix=matrix, dim=dim,
                       provider_fingerprint=fingerprint)
