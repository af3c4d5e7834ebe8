"""Byte pair encoding: training, tokenization, and the merges file format.

Training greedily merges the most frequent adjacent symbol pair (ties broken
lexicographically by pair) until the vocabulary reaches its budget or no pair
occurs at least twice. Words never merge across whitespace; there is no
end-of-word marker. Tokenization applies the learned merges in training
order within each word, which is realized efficiently as lowest-rank-first
merging (the two are equivalent).
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError
from .normalize import NormalizationConfig, DEFAULT_NORMALIZATION, normalize_text

MERGES_FILE_VERSION = 1


@dataclass
class BpeVocab:
    """Ordered merge list plus provenance; symbol count = alphabet + merges.

    Equality is over the merge structure; trained_on is a provenance record
    (scaling a corpus by repetition changes the digest but not the merges).
    """

    merges: list[tuple[str, str]]
    vocab_size: int
    trained_on: str = field(compare=False, default="untrained")
    _ranks: dict[tuple[str, str], int] = field(default_factory=dict, repr=False, compare=False)
    _cache: dict[str, tuple[str, ...]] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._ranks = {pair: i for i, pair in enumerate(self.merges)}
        self._cache = {}

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(f"{self.vocab_size}\n{self.trained_on}\n".encode())
        for a, b in self.merges:
            h.update(f"{a} {b}\n".encode())
        return h.hexdigest()


EMPTY_VOCAB = BpeVocab(merges=[], vocab_size=0, trained_on="untrained")


def corpus_digest(texts: list[str]) -> str:
    h = hashlib.sha256()
    for t in texts:
        h.update(str(len(t)).encode())
        h.update(b"\0")
        h.update(t.encode("utf-8"))
    return h.hexdigest()


def _best_pair(pair_counts: Counter) -> tuple[tuple[str, str], int]:
    best = None
    best_count = 0
    for pair, count in pair_counts.items():
        if count > best_count or (count == best_count and (best is None or pair < best)):
            best, best_count = pair, count
    return best, best_count


def train_bpe(texts: list[str], vocab_size: int) -> BpeVocab:
    """Learn a merge list from already-normalized texts.

    vocab_size counts base characters plus merged symbols and must exceed the
    alphabet size of the texts.
    """
    if not texts:
        raise DataError("cannot train BPE on an empty text list")

    word_freq: Counter[str] = Counter()
    for t in texts:
        word_freq.update(t.split())

    alphabet = {ch for w in word_freq for ch in w}
    if vocab_size <= len(alphabet):
        raise DataError(
            f"vocab_size {vocab_size} must exceed the alphabet size {len(alphabet)}"
        )

    # Each distinct word is a symbol sequence weighted by its frequency.
    words = [list(w) for w in word_freq]
    freqs = [word_freq[w] for w in word_freq]

    pair_counts: Counter[tuple[str, str]] = Counter()
    pair_words: dict[tuple[str, str], set[int]] = {}
    for wi, (symbols, f) in enumerate(zip(words, freqs)):
        for pair in zip(symbols, symbols[1:]):
            pair_counts[pair] += f
            pair_words.setdefault(pair, set()).add(wi)

    merges: list[tuple[str, str]] = []
    budget = vocab_size - len(alphabet)
    while len(merges) < budget and pair_counts:
        pair, count = _best_pair(pair_counts)
        if count < 2:
            break
        merges.append(pair)
        merged = pair[0] + pair[1]
        for wi in sorted(pair_words.get(pair, ())):
            symbols = words[wi]
            f = freqs[wi]
            for p in zip(symbols, symbols[1:]):
                pair_counts[p] -= f
                if pair_counts[p] <= 0:
                    del pair_counts[p]
                ws = pair_words.get(p)
                if ws is not None:
                    ws.discard(wi)
            new_symbols = _merge_word(symbols, pair, merged)
            words[wi] = new_symbols
            for p in zip(new_symbols, new_symbols[1:]):
                pair_counts[p] += f
                pair_words.setdefault(p, set()).add(wi)

    return BpeVocab(merges=merges, vocab_size=len(alphabet) + len(merges),
                    trained_on=corpus_digest(texts))


def _merge_word(symbols: list[str], pair: tuple[str, str], merged: str) -> list[str]:
    """Replace non-overlapping occurrences of pair, left to right."""
    out = []
    i = 0
    n = len(symbols)
    while i < n:
        if i + 1 < n and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            out.append(merged)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def _encode_word(word: str, vocab: BpeVocab) -> tuple[str, ...]:
    cached = vocab._cache.get(word)
    if cached is not None:
        return cached
    symbols = list(word)
    ranks = vocab._ranks
    while len(symbols) > 1:
        best_rank = None
        best_pair = None
        for pair in zip(symbols, symbols[1:]):
            r = ranks.get(pair)
            if r is not None and (best_rank is None or r < best_rank):
                best_rank, best_pair = r, pair
        if best_pair is None:
            break
        symbols = _merge_word(symbols, best_pair, best_pair[0] + best_pair[1])
    result = tuple(symbols)
    vocab._cache[word] = result
    return result


def tokenize(text: str, vocab: BpeVocab = EMPTY_VOCAB,
             cfg: NormalizationConfig = DEFAULT_NORMALIZATION) -> list[str]:
    """Normalize, split on whitespace, and BPE-encode each word."""
    tokens: list[str] = []
    for word in normalize_text(text, cfg).split():
        tokens.extend(_encode_word(word, vocab))
    return tokens


def save_merges(vocab: BpeVocab, path: str | Path) -> None:
    """One merge pair per line in training order, after `#` header lines."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"#papertrail-bpe {MERGES_FILE_VERSION}\n")
        f.write(f"#vocab_size {vocab.vocab_size}\n")
        f.write(f"#trained_on {vocab.trained_on}\n")
        for a, b in vocab.merges:
            f.write(f"{a} {b}\n")


def load_merges(path: str | Path) -> BpeVocab:
    merges: list[tuple[str, str]] = []
    vocab_size = 0
    trained_on = "unknown"
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read merges file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if line.startswith("#"):
            parts = line[1:].split()
            if parts[:1] == ["vocab_size"] and len(parts) == 2:
                vocab_size = int(parts[1])
            elif parts[:1] == ["trained_on"] and len(parts) == 2:
                trained_on = parts[1]
            continue
        if not line.strip():
            continue
        parts = line.split(" ")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: malformed merge line {line!r}")
        merges.append((parts[0], parts[1]))
    return BpeVocab(merges=merges, vocab_size=vocab_size, trained_on=trained_on)
