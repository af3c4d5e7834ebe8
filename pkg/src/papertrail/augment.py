"""Optional query and corpus augmentation through a text generator.

Holds the prompt templates (kept byte-for-byte as published, including their
visibly truncated example lines), a generator boundary with a canned-fixture
mode for offline tests, and the augmented vector store used by the
additional-documents (AD) mode. All of this is off by default: the shipped
pipeline runs identically with augmentation disabled.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import Corpus, Document, doc_text
from .dense import (EmbeddingProviderConfig, embed, exact_scan_scores,
                    provider_fingerprint)
from .errors import DataError, GenerationParseError, ProviderError
from .fusion import Candidate
from .service import post_json

REWRITE_TEMPLATE = """Translate informal text into precise academic language, preserving
original meaning.

Transformation Guidelines:
- Correct the original tweet's spelling and grammar errors while maintaining its style
- Convert colloquial language to precise academic terminology
- Convert hastags into proper words
- Do not add anything new. Only correct the mistakes in the original tweet.

Output format:
Return a single string

Example:
Original Tweet: "Just saw amazin new study - mice w/ #Alzheimers showed
45
#neurodegeneration research imo"

Output:
Just saw amazing new study - mice with Alzheimers showed 45
in memory after new drug treatment!! Game changer for
neurodegeneration research in my opinion

Transform the following tweet:
{tweet}
"""

EXPAND_TEMPLATE = """Translate informal text into precise academic language, according to the
transformation guidelines.

Transformation Guidelines:

First, correct the original tweet's spelling and grammar errors while
maintaining its style. Then transform the tweet into academic language
using these rules:

-Convert colloquial language to precise academic terminology
-Maintain semantic accuracy of the original message
-Use passive voice and objective scientific tone
-Eliminate informal expressions and subjective qualifiers
-Transform hashtags into their full, proper form (e.g., "#COVID19" -> "COVID-19 pandemic")
-Expand abbreviations and acronyms to their full forms
-Include key research terms that would appear in academic database searches
-Preserve all factual claims, statistics, and findings mentioned
-Structure as a concise academic abstract (2-3 sentences)

Output format:
Return a single continuous string with both versions separated by " || " as follows:
[Corrected Tweet] || [Academic Version]

Example:
Original Tweet: "Just saw amazin new study - mice w/ #Alzheimers showed
45
#neurodegeneration research imo"

Output:
"Just saw amazing new study - mice with #Alzheimers showed 45%
improvement in memory after new drug treatment!! Game changer for
#neurodegeneration research in my opinion || A recent pharmacological
intervention demonstrated significant efficacy in an Alzheimer's
disease mouse model, with subjects exhibiting a 45
memory function following administration of the novel compound.
These findings represent a potentially significant advancement in
neurodegenerative disease research, particularly regarding
therapeutic approaches for memory deficit amelioration in Alzheimer's
pathology."

Transform the following tweet:
{tweet}
"""

HYDE_TEMPLATE = """You are an expert in scientific research. Based on the following tweet,
generate a hypothetical scientific paper that includes only a title and
an abstract. The abstract should succinctly summarize the research
objective, methodology,  key findings, and conclusions.

Tweet: {tweet}

{format_instructions}
"""

DOC_SUMMARY_TEMPLATE = """Summarize the following document:

Title: {title}
Abstract: {page_content}

Make sure to include keywords that are likely to be found later by a
search.

{format_instructions}
"""

DOC_TWEET_TEMPLATE = """Generate a hypothetical Twitter tweet about the following document:

Title: {title}
Abstract: {page_content}

Make sure it looks like a typical tweet from an average person and is
not too long.

{format_instructions}
"""

TEMPLATES: dict[str, str] = {
    "rewrite": REWRITE_TEMPLATE,
    "expand": EXPAND_TEMPLATE,
    "hyde": HYDE_TEMPLATE,
    "doc_summary": DOC_SUMMARY_TEMPLATE,
    "doc_tweet": DOC_TWEET_TEMPLATE,
}

HYDE_FORMAT_INSTRUCTIONS = (
    'Return exactly two lines: the first starting with "Title: " and the '
    'second starting with "Abstract: ".')
PLAIN_FORMAT_INSTRUCTIONS = "Return a single paragraph of plain text."

EXPANSION_SEPARATOR = " || "

AUGMENT_MODES = ("none", "rewrite", "expand", "hyde", "ad")


def fill_template(name: str, **slots: str) -> str:
    try:
        body = TEMPLATES[name]
    except KeyError:
        raise ValueError(f"unknown template: {name!r}") from None
    return body.format(**slots)


def input_hash(template_name: str, filled_prompt: str) -> str:
    h = hashlib.sha256()
    h.update(template_name.encode("utf-8"))
    h.update(b"\0")
    h.update(filled_prompt.encode("utf-8"))
    return h.hexdigest()


@dataclass(frozen=True)
class GenerationProviderConfig:
    mode: str = "canned"
    endpoint: str | None = None
    fixture_path: str | Path | None = None

    def __post_init__(self):
        if self.mode not in ("service", "canned"):
            raise ValueError(f"unknown generation mode: {self.mode!r}")
        if self.mode == "service" and not self.endpoint:
            raise ValueError("service generation requires an endpoint")
        if self.mode == "canned" and not self.fixture_path:
            raise ValueError("canned generation requires a fixture_path")


class Generator:
    """Text generator with a deterministic (template, input-hash) cache."""

    def __init__(self, cfg: GenerationProviderConfig):
        self.cfg = cfg
        self._cache: dict[str, str] = {}
        self._fixtures: dict[str, str] | None = None

    def _load_fixtures(self) -> dict[str, str]:
        if self._fixtures is None:
            fixtures = {}
            try:
                lines = Path(self.cfg.fixture_path).read_text(encoding="utf-8").splitlines()
            except OSError as exc:
                raise ProviderError(
                    f"cannot read generation fixtures {self.cfg.fixture_path}: {exc}"
                ) from exc
            for lineno, line in enumerate(lines, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    fixtures[rec["input_hash"]] = rec["text"]
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise DataError(
                        f"{self.cfg.fixture_path}:{lineno}: bad fixture record: {exc}"
                    ) from exc
            self._fixtures = fixtures
        return self._fixtures

    def generate(self, template_name: str, filled_prompt: str) -> str:
        key = input_hash(template_name, filled_prompt)
        if key in self._cache:
            return self._cache[key]
        if self.cfg.mode == "canned":
            fixtures = self._load_fixtures()
            if key not in fixtures:
                raise ProviderError(
                    f"no canned output for template {template_name!r} "
                    f"(input_hash {key[:16]}...)")
            text = fixtures[key]
        else:
            resp = post_json(self.cfg.endpoint.rstrip("/") + "/generate",
                             {"template_name": template_name,
                              "filled_prompt": filled_prompt})
            text = resp.get("text")
            if not isinstance(text, str):
                raise ProviderError("generation service returned no text field")
        if not text.strip():
            raise ProviderError(
                f"generator returned empty output for template {template_name!r}")
        self._cache[key] = text
        return text


def rewrite_query(gen: Generator, tweet: str) -> str:
    """Academic-style rewrite of a post, used verbatim as the lexical query."""
    out = gen.generate("rewrite", fill_template("rewrite", tweet=tweet))
    return out.strip()


def expand_query(gen: Generator, tweet: str) -> str:
    """Corrected post concatenated with its academic expansion."""
    prompt = fill_template("expand", tweet=tweet)
    out = gen.generate("expand", prompt)
    if EXPANSION_SEPARATOR not in out:
        raise GenerationParseError(
            f"expansion output lacks the {EXPANSION_SEPARATOR!r} separator",
            raw_output=out)
    corrected, academic = out.split(EXPANSION_SEPARATOR, 1)
    return f"{corrected.strip()} {academic.strip()}"


def hyde_document(gen: Generator, tweet: str) -> str:
    """Synthetic title+abstract whose embedding replaces the query embedding."""
    prompt = fill_template("hyde", tweet=tweet,
                           format_instructions=HYDE_FORMAT_INSTRUCTIONS)
    out = gen.generate("hyde", prompt)
    title = abstract = None
    for line in out.splitlines():
        stripped = line.strip()
        if stripped.startswith("Title:") and title is None:
            title = stripped[len("Title:"):].strip()
        elif stripped.startswith("Abstract:") and abstract is None:
            abstract = stripped[len("Abstract:"):].strip()
    if not title or not abstract:
        raise GenerationParseError(
            "hypothetical document output lacks Title:/Abstract: lines",
            raw_output=out)
    return f"{title}\n{abstract}"


def augment_corpus(gen: Generator, d: Document) -> dict[str, str]:
    """Generate the two AD variants (summary, synthetic tweet) for a document."""
    summary = gen.generate("doc_summary", fill_template(
        "doc_summary", title=d.title, page_content=d.abstract,
        format_instructions=PLAIN_FORMAT_INSTRUCTIONS)).strip()
    tweet = gen.generate("doc_tweet", fill_template(
        "doc_tweet", title=d.title, page_content=d.abstract,
        format_instructions=PLAIN_FORMAT_INSTRUCTIONS)).strip()
    return {"summary": summary, "synthetic_tweet": tweet}


@dataclass
class AugmentedStore:
    """Vector rows for original documents plus AD variants.

    Several rows may map back to one doc_id; retrieval deduplicates by
    doc_id, keeping each document's best-scoring variant.
    """

    row_doc_ids: list[str]
    matrix: np.ndarray
    dim: int
    provider_fingerprint: str
    variants_per_doc: int = 3

    def topk(self, query_vec: np.ndarray, k: int = 100) -> list[Candidate]:
        query_vec = np.asarray(query_vec, dtype=np.float64)
        if query_vec.shape != (self.dim,):
            raise DataError(
                f"query vector shape {query_vec.shape} does not match dim {self.dim}")
        if k <= 0:
            return []
        scores = exact_scan_scores(self.matrix, query_vec)
        best: dict[str, float] = {}
        for doc_id, s in zip(self.row_doc_ids, scores):
            if doc_id not in best or s > best[doc_id]:
                best[doc_id] = s
        ranked = sorted(best.items(), key=lambda item: (-item[1], item[0]))
        return [
            Candidate(doc_id=doc_id, sources=frozenset({"semantic"}),
                      semantic_rank=rank, semantic_score=score)
            for rank, (doc_id, score) in enumerate(ranked[:k], start=1)
        ]


def build_augmented_store(corpus: Corpus, gen: Generator,
                          provider: EmbeddingProviderConfig,
                          batch_size: int = 64) -> AugmentedStore:
    """Three rows per document: original text, summary, synthetic tweet."""
    row_doc_ids: list[str] = []
    texts: list[str] = []
    for d in corpus.documents:
        variants = augment_corpus(gen, d)
        for text in (doc_text(d), variants["summary"], variants["synthetic_tweet"]):
            row_doc_ids.append(d.doc_id)
            texts.append(text)
    chunks = []
    for start in range(0, len(texts), batch_size):
        chunks.append(embed(provider, texts[start:start + batch_size], "document"))
    matrix = np.vstack(chunks)
    return AugmentedStore(row_doc_ids=row_doc_ids, matrix=matrix,
                          dim=matrix.shape[1],
                          provider_fingerprint=provider_fingerprint(provider),
                          variants_per_doc=3)
