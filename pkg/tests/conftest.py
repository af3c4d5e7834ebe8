import json
import threading
import zlib
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from papertrail.bpe import BpeVocab
from papertrail.corpus import Corpus, Document


def word_vocab(words):
    """Merge chain per word so BPE tokenization reproduces whole words.

    Only safe when no word's intermediate prefix pair can fire inside
    another word; fixture word lists are chosen accordingly.
    """
    merges, seen = [], set()
    for w in words:
        for i in range(1, len(w)):
            pair = (w[:i], w[i])
            if pair not in seen:
                seen.add(pair)
                merges.append(pair)
    return BpeVocab(merges=merges, vocab_size=len(merges), trained_on="fixture")


@pytest.fixture
def three_doc_corpus():
    docs = (
        Document("d1", "virus spread", ""),
        Document("d2", "virus virus mutation", ""),
        Document("d3", "economic policy", ""),
    )
    return Corpus(documents=docs)


@pytest.fixture
def three_doc_vocab():
    return word_vocab(["virus", "spread", "mutation", "economic", "policy"])


def planted_corpus(n_docs=50, words_per_title=3, seed=7):
    """Synthetic corpus where each title is a unique full-overlap target.

    Every word is unique to its document and repeated in the abstract, so a
    generously budgeted BPE run merges each word into a single token.
    """
    import random
    rng = random.Random(seed)
    letters = "abcdefghijklmnopqrstuvwxyz"
    seen = set()
    docs = []
    for i in range(n_docs):
        words = []
        for j in range(words_per_title):
            while True:
                w = "".join(rng.choice(letters) for _ in range(4)) + str(i)
                if w not in seen:
                    seen.add(w)
                    words.append(w)
                    break
        title = " ".join(words)
        abstract = f"{title} {title}"
        docs.append(Document(f"doc{i:03d}", title, abstract))
    return Corpus(documents=tuple(docs))


class _StubHandler(BaseHTTPRequestHandler):
    """Configurable model-server stub for service-mode client tests."""

    def log_message(self, *args):
        pass

    def _send(self, status, payload):
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/health":
            self._send(200, {
                "status": "ok",
                "embedder": {"fingerprint": "stub-embedder-v1", "query_prefix": ""},
                "reranker": {"fingerprint": "stub-reranker-v1"},
            })
        else:
            self._send(404, {"error": "not found"})

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        req = json.loads(self.rfile.read(length))
        behavior = self.server.behavior

        if self.path == "/embed":
            texts = req["texts"]
            dim = behavior.get("dim", 4)
            if behavior.get("embed_error"):
                self._send(500, {"error": "boom"})
                return
            vectors = []
            for t in texts:
                rng = np.random.default_rng(zlib.crc32(t.encode("utf-8")))
                v = rng.normal(size=dim)
                v = v / np.linalg.norm(v)
                if behavior.get("denormalize"):
                    v = v * behavior["denormalize"]
                vectors.append([float(x) for x in v])
            if behavior.get("drop_last_dim"):
                vectors = [v[:-1] for v in vectors]
            if behavior.get("nan_vector"):
                vectors[0][0] = float("nan")
            self._send(200, {"vectors": vectors, "dim": len(vectors[0]),
                             "model_fingerprint": "stub-embedder-v1"})
        elif self.path == "/rerank":
            cands = req["candidates"]
            scores = [float(len(c["text"])) for c in cands]
            if behavior.get("drop_score"):
                scores = scores[:-1]
            if behavior.get("query_overlap_scores"):
                qtokens = set(req["query"].split())
                scores = [len(qtokens & set(c["text"].split())) / max(len(qtokens), 1)
                          for c in cands]
            self._send(200, {"scores": scores, "model_fingerprint": "stub-reranker-v1"})
        elif self.path == "/generate":
            self._send(200, {"text": behavior.get(
                "generated_text", f"echo:{req['template_name']}")})
        else:
            self._send(404, {"error": "not found"})


@pytest.fixture(scope="session")
def _stub_server_instance():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    server.behavior = {}
    thread = threading.Thread(
        target=lambda: server.serve_forever(poll_interval=0.05), daemon=True)
    thread.start()
    yield server, f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()


@pytest.fixture
def stub_server(_stub_server_instance):
    server, url = _stub_server_instance
    server.behavior.clear()
    return server, url
