"""Retrieval metrics: reciprocal rank, MRR@k, Success@k, and the eval report.

With exactly one gold document per query, the challenge's "Precision@k" is
the fraction of queries whose gold lands in the top k; the report prints both
names for that column.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import DataError


def reciprocal_rank_at_k(ranked: list[str], gold: str, k: int) -> float:
    """1/rank if gold is at rank <= k (1-based), else 0."""
    if len(set(ranked)) != len(ranked):
        raise DataError("ranked list contains duplicates")
    for rank, doc_id in enumerate(ranked[:k], start=1):
        if doc_id == gold:
            return 1.0 / rank
    return 0.0


def _require_golds(results: list[list[str]], golds: list[str | None]) -> None:
    if len(results) != len(golds):
        raise DataError("results and golds are misaligned")
    if not results:
        raise DataError("no queries to evaluate")
    missing = [i for i, g in enumerate(golds) if g is None]
    if missing:
        raise DataError(f"query at position {missing[0]} has no gold doc_id")


def mrr_at_k(results: list[list[str]], golds: list[str | None], k: int) -> float:
    """Mean over queries of the reciprocal rank at cutoff k."""
    _require_golds(results, golds)
    total = sum(reciprocal_rank_at_k(r, g, k) for r, g in zip(results, golds))
    return total / len(results)


def success_at_k(results: list[list[str]], golds: list[str | None], k: int) -> float:
    """Fraction of queries whose gold appears in the top k."""
    _require_golds(results, golds)
    hits = sum(1 for r, g in zip(results, golds) if g in r[:k])
    return hits / len(results)


@dataclass
class PerQueryResult:
    query_id: str
    gold_rank: int | None
    reciprocal_rank: float


@dataclass
class EvalReport:
    per_query: list[PerQueryResult]
    mrr: dict[int, float]
    success: dict[int, float]
    config_fingerprint: str
    candidate_success: float | None = None
    label: str = ""
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "label": self.label,
            "config_fingerprint": self.config_fingerprint,
            "mrr": {str(k): v for k, v in sorted(self.mrr.items())},
            "success": {str(k): v for k, v in sorted(self.success.items())},
            "candidate_success": self.candidate_success,
            "per_query": [
                {"query_id": p.query_id, "gold_rank": p.gold_rank,
                 "reciprocal_rank": p.reciprocal_rank}
                for p in self.per_query
            ],
        }
        if self.extras:
            payload["extras"] = self.extras
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def build_report(query_ids: list[str], results: list[list[str]],
                 golds: list[str | None], config_fingerprint: str,
                 mrr_ks: tuple[int, ...] = (1, 5),
                 success_ks: tuple[int, ...] = (30, 100),
                 candidate_success: float | None = None,
                 label: str = "") -> EvalReport:
    _require_golds(results, golds)
    primary_k = max(mrr_ks)
    per_query = []
    for qid, ranked, gold in zip(query_ids, results, golds):
        rank = ranked.index(gold) + 1 if gold in ranked else None
        per_query.append(PerQueryResult(
            query_id=qid, gold_rank=rank,
            reciprocal_rank=reciprocal_rank_at_k(ranked, gold, primary_k)))
    return EvalReport(
        per_query=per_query,
        mrr={k: mrr_at_k(results, golds, k) for k in mrr_ks},
        success={k: success_at_k(results, golds, k) for k in success_ks},
        config_fingerprint=config_fingerprint,
        candidate_success=candidate_success,
        label=label,
    )


def format_table(reports: list[EvalReport]) -> str:
    """Fixed-width comparison table; '-' where a cutoff was not evaluated."""
    mrr_ks = sorted({k for r in reports for k in r.mrr})
    success_ks = sorted({k for r in reports for k in r.success})
    headers = (["approach"] + [f"MRR@{k}" for k in mrr_ks]
               + [f"P@{k}" for k in success_ks])
    rows = []
    for r in reports:
        row = [r.label or r.config_fingerprint[:12]]
        row += [f"{r.mrr[k] * 100:.2f}" if k in r.mrr else "-" for k in mrr_ks]
        row += [f"{r.success[k] * 100:.2f}" if k in r.success else "-" for k in success_ks]
        rows.append(row)
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    if success_ks:
        lines.append("P@k = Success@k: fraction of queries with the gold source in the top k.")
    for r in reports:
        lines.append(f"config[{r.label or 'run'}] = {r.config_fingerprint}")
    return "\n".join(lines) + "\n"
