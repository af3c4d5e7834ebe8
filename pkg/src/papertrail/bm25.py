"""Okapi BM25 over a BPE-tokenized inverted index.

Scoring uses the +1-floored IDF variant:

    score(q, d) = sum over t in q of
        IDF(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))
    IDF(t) = ln(1 + (N - df + 0.5) / (df + 0.5))

so IDF stays positive for every term and absent terms contribute zero.
Repeated query tokens contribute once per occurrence.
"""

from __future__ import annotations

import hashlib
import json
import math
import zlib
from bisect import bisect_left
from dataclasses import dataclass
from pathlib import Path

from .bpe import BpeVocab, tokenize
from .corpus import Corpus, doc_text
from .errors import DataError
from .fusion import Candidate
from .normalize import NormalizationConfig, DEFAULT_NORMALIZATION

INDEX_MAGIC = b"PTIDX"
INDEX_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 1.5
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not 0 <= self.b <= 1:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


@dataclass
class InvertedIndex:
    doc_ids: list[str]
    doc_len: list[int]
    avgdl: float
    df: dict[str, int]
    postings: dict[str, list[tuple[int, int]]]
    params: Bm25Params
    vocab: BpeVocab
    normalization: NormalizationConfig
    corpus_fingerprint: str

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    def idf(self, term: str) -> float:
        df = self.df.get(term, 0)
        n = self.n_docs
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def fingerprint(self) -> str:
        return hashlib.sha256(_canonical_payload(self)).hexdigest()


def build_inverted_index(corpus: Corpus, vocab: BpeVocab,
                         params: Bm25Params = Bm25Params(),
                         cfg: NormalizationConfig = DEFAULT_NORMALIZATION) -> InvertedIndex:
    """Index doc_text (title + newline + abstract) of every document."""
    doc_ids = []
    doc_len = []
    df: dict[str, int] = {}
    postings: dict[str, list[tuple[int, int]]] = {}
    for pos, doc in enumerate(corpus.documents):
        tokens = tokenize(doc_text(doc), vocab, cfg)
        doc_ids.append(doc.doc_id)
        doc_len.append(len(tokens))
        counts: dict[str, int] = {}
        for t in tokens:
            counts[t] = counts.get(t, 0) + 1
        for term, tf in counts.items():
            df[term] = df.get(term, 0) + 1
            postings.setdefault(term, []).append((pos, tf))
    avgdl = sum(doc_len) / len(doc_len)
    return InvertedIndex(doc_ids=doc_ids, doc_len=doc_len, avgdl=avgdl, df=df,
                         postings=postings, params=params, vocab=vocab,
                         normalization=cfg, corpus_fingerprint=corpus.fingerprint())


def bm25_score(index: InvertedIndex, query_tokens: list[str], doc: int) -> float:
    """Score one document position against tokenized query terms."""
    if not 0 <= doc < index.n_docs:
        raise DataError(f"doc position {doc} out of range 0..{index.n_docs - 1}")
    k1 = index.params.k1
    b = index.params.b
    dl = index.doc_len[doc]
    norm = k1 * (1.0 - b + b * dl / index.avgdl)
    score = 0.0
    for t in query_tokens:
        plist = index.postings.get(t, ())
        i = bisect_left(plist, (doc,))
        tf = plist[i][1] if i < len(plist) and plist[i][0] == doc else 0
        if tf == 0:
            continue
        score += index.idf(t) * (tf * (k1 + 1.0)) / (tf + norm)
    return score


def lexical_topk(index: InvertedIndex, query: str, k: int = 30) -> list[Candidate]:
    """Top-k documents with nonzero BM25 score; score desc, then doc_id asc.

    Per-document sums run over query tokens in query order with the same
    arithmetic as bm25_score, so the ranking matches a full brute-force scan
    exactly, not just within tolerance.
    """
    query_tokens = tokenize(query, index.vocab, index.normalization)
    if k <= 0 or not query_tokens:
        return []
    k1 = index.params.k1
    b = index.params.b
    token_stats: dict[str, tuple[float, dict[int, int]]] = {}
    for t in query_tokens:
        if t not in token_stats:
            token_stats[t] = (index.idf(t), dict(index.postings.get(t, ())))
    matched: set[int] = set()
    for _idf, tf_map in token_stats.values():
        matched.update(tf_map)
    scored: list[tuple[int, float]] = []
    for pos in matched:
        dl = index.doc_len[pos]
        norm = k1 * (1.0 - b + b * dl / index.avgdl)
        score = 0.0
        for t in query_tokens:
            idf, tf_map = token_stats[t]
            tf = tf_map.get(pos, 0)
            if tf == 0:
                continue
            score += idf * (tf * (k1 + 1.0)) / (tf + norm)
        if score > 0.0:
            scored.append((pos, score))
    scored.sort(key=lambda item: (-item[1], index.doc_ids[item[0]]))
    return [
        Candidate(doc_id=index.doc_ids[pos], sources=frozenset({"lexical"}),
                  lexical_rank=rank, lexical_score=score)
        for rank, (pos, score) in enumerate(scored[:k], start=1)
    ]


def _canonical_payload(index: InvertedIndex) -> bytes:
    payload = {
        "format_version": INDEX_FORMAT_VERSION,
        "corpus_fingerprint": index.corpus_fingerprint,
        "params": {"k1": index.params.k1, "b": index.params.b},
        "normalization": {
            "lowercase": index.normalization.lowercase,
            "strip_punctuation": index.normalization.strip_punctuation,
            "preserved_symbols": sorted(index.normalization.preserved_symbols),
            "hashtag_policy": index.normalization.hashtag_policy,
            "strip_urls": index.normalization.strip_urls,
        },
        "doc_ids": index.doc_ids,
        "doc_len": index.doc_len,
        "df": {t: index.df[t] for t in sorted(index.df)},
        "postings": {t: index.postings[t] for t in sorted(index.postings)},
        "vocab": {
            "merges": index.vocab.merges,
            "vocab_size": index.vocab.vocab_size,
            "trained_on": index.vocab.trained_on,
        },
    }
    return json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Versioned binary file: magic, version byte, zlib-compressed payload."""
    blob = INDEX_MAGIC + bytes([INDEX_FORMAT_VERSION]) + zlib.compress(
        _canonical_payload(index), level=6)
    Path(path).write_bytes(blob)


def load_index(path: str | Path) -> InvertedIndex:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read index file {path}: {exc}") from exc
    if blob[: len(INDEX_MAGIC)] != INDEX_MAGIC:
        raise DataError(f"{path} is not an index file (bad magic)")
    version = blob[len(INDEX_MAGIC)]
    if version != INDEX_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported index format version {version}")
    try:
        payload = json.loads(zlib.decompress(blob[len(INDEX_MAGIC) + 1:]))
    except (zlib.error, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: corrupt index payload: {exc}") from exc
    norm = payload["normalization"]
    index = InvertedIndex(
        doc_ids=list(payload["doc_ids"]),
        doc_len=[int(x) for x in payload["doc_len"]],
        avgdl=sum(payload["doc_len"]) / len(payload["doc_len"]),
        df={t: int(v) for t, v in payload["df"].items()},
        postings={t: [(int(p), int(f)) for p, f in plist]
                  for t, plist in payload["postings"].items()},
        params=Bm25Params(k1=payload["params"]["k1"], b=payload["params"]["b"]),
        vocab=BpeVocab(merges=[tuple(m) for m in payload["vocab"]["merges"]],
                       vocab_size=payload["vocab"]["vocab_size"],
                       trained_on=payload["vocab"]["trained_on"]),
        normalization=NormalizationConfig(
            lowercase=norm["lowercase"],
            strip_punctuation=norm["strip_punctuation"],
            preserved_symbols=frozenset(norm["preserved_symbols"]),
            hashtag_policy=norm["hashtag_policy"],
            strip_urls=norm["strip_urls"],
        ),
        corpus_fingerprint=payload["corpus_fingerprint"],
    )
    return index
