"""HTTP surface: POST /embed, POST /rerank, GET /health.

Responses are position-aligned with their requests; vectors come back
unit-norm; overlong inputs are a 400 reporting the offending token count,
never a silent truncation. /health names both checkpoint fingerprints and
the query instruction prefix so clients can pin what they talk to.
"""

from __future__ import annotations

import math
import os

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .backends import MAX_TOKENS, OverlongInputError, build_embedder, build_reranker

EMBEDDER_ENV = "PAPERTRAIL_EMBEDDER"
RERANKER_ENV = "PAPERTRAIL_RERANKER"
DEVICE_ENV = "PAPERTRAIL_DEVICE"
QUERY_PREFIX_ENV = "PAPERTRAIL_QUERY_PREFIX"
MAX_TOKENS_ENV = "PAPERTRAIL_MAX_TOKENS"


class EmbedRequest(BaseModel):
    texts: list[str] = Field(min_length=1)
    role: str = "query"


class RerankCandidate(BaseModel):
    id: str
    text: str


class RerankRequest(BaseModel):
    query: str
    candidates: list[RerankCandidate] = Field(min_length=1)


def create_app(embedder_spec: str | None = None,
               reranker_spec: str | None = None) -> FastAPI:
    embedder_spec = embedder_spec or os.environ.get(EMBEDDER_ENV, "hash:384")
    reranker_spec = reranker_spec or os.environ.get(RERANKER_ENV, "hash:512")
    device = os.environ.get(DEVICE_ENV) or None
    query_prefix = os.environ.get(QUERY_PREFIX_ENV, "query: ")
    max_tokens = int(os.environ.get(MAX_TOKENS_ENV, MAX_TOKENS))

    embedder = build_embedder(embedder_spec, query_prefix, device, max_tokens)
    reranker = build_reranker(reranker_spec, device, max_tokens)

    app = FastAPI(title="papertrail model server")

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "embedder": {
                "fingerprint": embedder.fingerprint,
                "dim": embedder.dim,
                "max_tokens": embedder.max_tokens,
                "query_prefix": embedder.query_prefix,
            },
            "reranker": {
                "fingerprint": reranker.fingerprint,
                "max_tokens": reranker.max_tokens,
            },
        }

    @app.post("/embed")
    def embed(req: EmbedRequest):
        if req.role not in ("query", "document"):
            raise HTTPException(422, f"unknown role: {req.role!r}")
        if any(not t.strip() for t in req.texts):
            raise HTTPException(422, "texts must be non-empty after trimming")
        try:
            matrix = embedder.embed(req.texts, req.role)
        except OverlongInputError as exc:
            raise HTTPException(400, str(exc)) from exc
        return {
            "vectors": [[float(x) for x in row] for row in matrix],
            "dim": embedder.dim,
            "model_fingerprint": embedder.fingerprint,
        }

    @app.post("/rerank")
    def rerank(req: RerankRequest):
        ids = [c.id for c in req.candidates]
        if len(set(ids)) != len(ids):
            raise HTTPException(422, "candidate ids must be unique")
        try:
            scores = reranker.score(req.query, [c.text for c in req.candidates])
        except OverlongInputError as exc:
            raise HTTPException(400, str(exc)) from exc
        if len(scores) != len(req.candidates) or not all(map(math.isfinite, scores)):
            raise HTTPException(500, "reranker produced an invalid score vector")
        return {"scores": scores, "model_fingerprint": reranker.fingerprint}

    return app
