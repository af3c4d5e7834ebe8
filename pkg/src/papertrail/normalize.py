"""Text normalization applied before tokenization on both documents and queries.

The pipeline is: lowercase, strip URLs, apply the hashtag policy, remove
punctuation and symbol characters (keeping a configurable preserved set, '%'
by default, and all digits), then collapse whitespace. The result is stable
under re-application.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field

URL_RE = re.compile(r"(?:https?://\S+|www\.\S+)")
HASHTAG_RE = re.compile(r"#\w+")

HASHTAG_POLICIES = ("strip_marker", "drop_token")


@dataclass(frozen=True)
class NormalizationConfig:
    """Switches for the normalization pass.

    hashtag_policy: "strip_marker" keeps the tag body ("#flu" -> "flu"),
    "drop_token" removes the whole tag.
    """

    lowercase: bool = True
    strip_punctuation: bool = True
    preserved_symbols: frozenset[str] = field(default_factory=lambda: frozenset("%"))
    hashtag_policy: str = "strip_marker"
    strip_urls: bool = True

    def __post_init__(self):
        if self.hashtag_policy not in HASHTAG_POLICIES:
            raise ValueError(f"unknown hashtag_policy: {self.hashtag_policy!r}")
        object.__setattr__(self, "preserved_symbols", frozenset(self.preserved_symbols))


DEFAULT_NORMALIZATION = NormalizationConfig()


def _is_removable(ch: str, preserved: frozenset[str]) -> bool:
    if ch in preserved:
        return False
    # Unicode punctuation (P*) and symbols (S*); digits and letters survive.
    return unicodedata.category(ch)[0] in ("P", "S")


def normalize_text(raw: str, cfg: NormalizationConfig = DEFAULT_NORMALIZATION) -> str:
    """Normalize raw text; total and idempotent."""
    text = raw.lower() if cfg.lowercase else raw
    if cfg.strip_urls:
        text = URL_RE.sub(" ", text)
    if cfg.hashtag_policy == "drop_token":
        text = HASHTAG_RE.sub(" ", text)
    # strip_marker needs no dedicated step: '#' falls to punctuation removal,
    # leaving the tag body behind.
    if cfg.strip_punctuation:
        text = "".join(
            " " if _is_removable(ch, cfg.preserved_symbols) else ch for ch in text
        )
    return " ".join(text.split())
