"""Corpus and query-set loading.

Documents are (cord_uid, title, abstract) records; the indexed text is the
title and abstract joined by a newline, nothing else. Corpus files are JSONL
or TSV with those column names; query files are TSV or JSONL with
(post_id, tweet_text[, cord_uid]).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError

CORPUS_FIELDS = ("cord_uid", "title", "abstract")
QUERY_FIELDS = ("post_id", "tweet_text", "cord_uid")


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    abstract: str

    def __post_init__(self):
        if not self.doc_id:
            raise DataError("document with empty doc_id")
        if not self.title and not self.abstract:
            raise DataError(f"document {self.doc_id!r} has neither title nor abstract")


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str
    gold_doc_id: str | None = None

    def __post_init__(self):
        if not self.query_id:
            raise DataError("query with empty query_id")


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    id_index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.documents:
            raise DataError("empty corpus")
        index = {d.doc_id: i for i, d in enumerate(self.documents)}
        if len(index) != len(self.documents):
            raise DataError("duplicate doc_id in corpus")
        object.__setattr__(self, "id_index", index)

    def __len__(self) -> int:
        return len(self.documents)

    def get(self, doc_id: str) -> Document:
        try:
            return self.documents[self.id_index[doc_id]]
        except KeyError:
            raise DataError(f"unknown doc_id: {doc_id!r}") from None

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for d in self.documents:
            h.update(json.dumps([d.doc_id, d.title, d.abstract]).encode("utf-8"))
        return h.hexdigest()


@dataclass(frozen=True)
class QuerySet:
    """Queries in file order; has_gold is true only when every query carries one."""

    queries: tuple[Query, ...]
    has_gold: bool

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)


def doc_text(d: Document) -> str:
    """Canonical retrieval text: title, one newline, abstract. No metadata."""
    return f"{d.title}\n{d.abstract}"


def _read_lines(path: str | Path) -> list[str]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path} is not valid UTF-8: {exc}") from exc
    return text.splitlines()


def _guess_format(path: str | Path, fmt: str | None) -> str:
    if fmt is not None:
        if fmt not in ("jsonl", "tsv"):
            raise DataError(f"unsupported format: {fmt!r}")
        return fmt
    suffix = Path(path).suffix.lower()
    return "tsv" if suffix in (".tsv", ".tab") else "jsonl"


def _parse_tsv(lines: list[str], required: tuple[str, ...], optional: tuple[str, ...],
               path: str | Path) -> list[dict[str, str]]:
    """Header-first TSV, plain tab splitting (no quoting)."""
    header = lines[0].split("\t")
    for col in required:
        if col not in header:
            raise DataError(f"{path}: missing column {col!r} in TSV header")
    known = set(required) | set(optional)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(header):
            raise DataError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(parts)}"
            )
        row = {col: val for col, val in zip(header, parts) if col in known}
        rows.append(row)
    return rows


def _parse_jsonl(lines: list[str], path: str | Path) -> list[dict]:
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: malformed JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise DataError(f"{path}:{lineno}: expected a JSON object")
        records.append(obj)
    return records


def load_corpus(path: str | Path, format: str | None = None) -> Corpus:
    """Load a document corpus from JSONL or TSV.

    Rejects duplicate ids and malformed records (with line numbers); an empty
    file is an error.
    """
    fmt = _guess_format(path, format)
    lines = _read_lines(path)
    if fmt == "tsv":
        if not lines:
            raise DataError(f"{path}: empty corpus")
        records = _parse_tsv(lines, required=("cord_uid", "title", "abstract"),
                             optional=(), path=path)
    else:
        records = _parse_jsonl(lines, path)

    docs = []
    seen: set[str] = set()
    for i, rec in enumerate(records, start=1):
        doc_id = str(rec.get("cord_uid", "") or "")
        if not doc_id:
            raise DataError(f"{path}: record {i}: missing cord_uid")
        if doc_id in seen:
            raise DataError(f"{path}: duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        docs.append(Document(doc_id=doc_id,
                             title=str(rec.get("title", "") or ""),
                             abstract=str(rec.get("abstract", "") or "")))
    if not docs:
        raise DataError(f"{path}: empty corpus")
    return Corpus(documents=tuple(docs))


def load_queries(path: str | Path, format: str | None = None) -> QuerySet:
    """Load queries; the gold column is optional (absent for blind test sets)."""
    fmt = _guess_format(path, format)
    lines = _read_lines(path)
    if fmt == "tsv":
        if not lines:
            raise DataError(f"{path}: empty query file")
        records = _parse_tsv(lines, required=("post_id", "tweet_text"),
                             optional=("cord_uid",), path=path)
    else:
        records = _parse_jsonl(lines, path)

    queries = []
    seen: set[str] = set()
    for i, rec in enumerate(records, start=1):
        query_id = str(rec.get("post_id", "") or "")
        if not query_id:
            raise DataError(f"{path}: record {i}: missing post_id")
        if query_id in seen:
            raise DataError(f"{path}: duplicate query_id {query_id!r}")
        seen.add(query_id)
        gold = rec.get("cord_uid")
        gold = str(gold) if gold not in (None, "") else None
        queries.append(Query(query_id=query_id,
                             text=str(rec.get("tweet_text", "") or ""),
                             gold_doc_id=gold))
    if not queries:
        raise DataError(f"{path}: empty query file")
    has_gold = all(q.gold_doc_id is not None for q in queries)
    return QuerySet(queries=tuple(queries), has_gold=has_gold)


def save_corpus_jsonl(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus back out as JSONL; load_corpus(save(c)) == c."""
    with open(path, "w", encoding="utf-8") as f:
        for d in corpus.documents:
            f.write(json.dumps(
                {"cord_uid": d.doc_id, "title": d.title, "abstract": d.abstract},
                ensure_ascii=False) + "\n")
