"""Command line interface.

Verbs: index, search, evaluate, ablate, augment, submit. A flat JSON config
file (--config) mirrors RunConfig; individual flags override it. Exit codes:
0 success, 1 usage error, 2 data error, 3 provider error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .augment import (AUGMENT_MODES, GenerationProviderConfig, Generator,
                      augment_corpus, expand_query, hyde_document, rewrite_query)
from .bm25 import build_inverted_index, load_index, save_index
from .bpe import load_merges, save_merges, train_bpe
from .corpus import load_corpus, load_queries, doc_text
from .dense import build_vector_store, load_store, save_store
from .errors import DataError, ProviderError
from .metrics import format_table
from .normalize import normalize_text
from .pipeline import (RunConfig, build_artifacts, embedding_provider_from,
                       run_ablation, run_pipeline, run_query,
                       standard_ablation_grid, write_submission)
from .service import default_endpoint

LEXICAL_INDEX_FILE = "lexical.idx"
MERGES_FILE = "bpe.merges"
DENSE_STORE_FILE = "dense.vec"


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


def _add_corpus_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corpus", required=True, help="corpus file (JSONL or TSV)")
    p.add_argument("--format", choices=["jsonl", "tsv"], default=None,
                   help="override format detection")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON config file mirroring RunConfig")
    p.add_argument("--index-dir", help="directory with prebuilt index artifacts")
    p.add_argument("--fusion", choices=["rerank", "rrf"], default=None)
    p.add_argument("--lex-k", type=int, default=None)
    p.add_argument("--sem-k", type=int, default=None)
    p.add_argument("--top-n", type=int, default=None)
    p.add_argument("--rrf-constant", type=float, default=None)
    p.add_argument("--rrf-window", type=int, default=None)
    p.add_argument("--vocab-size", type=int, default=None)
    p.add_argument("--k1", type=float, default=None)
    p.add_argument("--b", type=float, default=None)
    p.add_argument("--embedding-provider", choices=["hash", "file", "service"],
                   default=None)
    p.add_argument("--embedding-endpoint", default=None)
    p.add_argument("--embedding-path", default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--reranker", choices=["overlap", "service"], default=None)
    p.add_argument("--reranker-endpoint", default=None)


_FLAG_TO_FIELD = {
    "fusion": "mode",
    "lex_k": "lex_k",
    "sem_k": "sem_k",
    "top_n": "top_n",
    "rrf_constant": "rrf_constant",
    "rrf_window": "rrf_window",
    "vocab_size": "vocab_size",
    "k1": "k1",
    "b": "b",
    "embedding_endpoint": "embedding_endpoint",
    "embedding_path": "embedding_path",
    "dim": "embedding_dim",
    "reranker_endpoint": "reranker_endpoint",
}

_PROVIDER_ALIASES = {"hash": "hash_test", "file": "file", "service": "service"}
_RERANKER_ALIASES = {"overlap": "overlap_stub", "service": "service"}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if getattr(args, "config", None):
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"cannot read config {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"{args.config}: invalid JSON: {exc}") from exc
        known = {f.name for f in dataclasses.fields(RunConfig)}
        unknown = set(raw) - known
        if unknown:
            raise DataError(f"{args.config}: unknown config keys {sorted(unknown)}")
        values.update(raw)
    for flag, field in _FLAG_TO_FIELD.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[field] = v
    provider = getattr(args, "embedding_provider", None)
    if provider is not None:
        values["embedding_mode"] = _PROVIDER_ALIASES[provider]
    reranker = getattr(args, "reranker", None)
    if reranker is not None:
        values["reranker_mode"] = _RERANKER_ALIASES[reranker]
    # service endpoints fall back to the environment
    env = default_endpoint()
    if env:
        if values.get("embedding_mode") == "service":
            values.setdefault("embedding_endpoint", env)
        if values.get("reranker_mode") == "service":
            values.setdefault("reranker_endpoint", env)
        if values.get("generation_mode") == "service":
            values.setdefault("generation_endpoint", env)
    try:
        return RunConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _load_corpus(args):
    corpus = load_corpus(args.corpus, args.format)
    _info(f"loaded {len(corpus)} documents from {args.corpus}")
    return corpus


def _load_queries(args):
    queries = load_queries(args.queries, getattr(args, "query_format", None))
    golds = "with" if queries.has_gold else "without"
    _info(f"loaded {len(queries)} queries from {args.queries} ({golds} gold ids)")
    return queries


def _artifacts_for_run(cfg: RunConfig, corpus, index_dir: str | None):
    index = None
    store = None
    if index_dir:
        d = Path(index_dir)
        idx_path = d / LEXICAL_INDEX_FILE
        if idx_path.exists():
            index = load_index(idx_path)
            if index.corpus_fingerprint != corpus.fingerprint():
                raise DataError(
                    f"{idx_path} was built from a different corpus "
                    "(fingerprint mismatch)")
        store_path = d / DENSE_STORE_FILE
        if store_path.exists() and cfg.embedding_mode != "hash_test":
            store = load_store(store_path)
    return build_artifacts(cfg, corpus, index=index, store=store)


def cmd_index(args) -> int:
    if getattr(args, "embedding_provider_alias", None) and not args.embedding_provider:
        args.embedding_provider = args.embedding_provider_alias
    if getattr(args, "embedding_endpoint_alias", None) and not args.embedding_endpoint:
        args.embedding_endpoint = args.embedding_endpoint_alias
    if getattr(args, "embedding_path_alias", None) and not args.embedding_path:
        args.embedding_path = args.embedding_path_alias
    corpus = _load_corpus(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = config_from_args(args)
    norm = cfg.normalization()

    if args.kind == "lexical":
        texts = [normalize_text(doc_text(d), norm) for d in corpus.documents]
        vocab = train_bpe(texts, cfg.vocab_size)
        index = build_inverted_index(corpus, vocab, cfg.bm25_params(), norm)
        save_merges(vocab, out / MERGES_FILE)
        save_index(index, out / LEXICAL_INDEX_FILE)
        _info(f"indexed {index.n_docs} documents, {len(index.df)} terms, "
              f"{len(vocab.merges)} BPE merges -> {out}")
        return 0

    # dense
    merges_path = Path(args.merges) if args.merges else out / MERGES_FILE
    if cfg.embedding_mode == "hash_test":
        if not merges_path.exists():
            raise DataError(
                f"hash provider needs a BPE merges file; {merges_path} not found "
                "(run `papertrail index lexical` first or pass --merges)")
        vocab = load_merges(merges_path)
    else:
        vocab = None
    provider = embedding_provider_from(cfg, vocab)
    store = build_vector_store(corpus, provider)
    save_store(store, out / DENSE_STORE_FILE)
    _info(f"embedded {len(store.doc_ids)} documents (dim {store.dim}, "
          f"provider {store.provider_fingerprint}) -> {out}")
    return 0


def cmd_search(args) -> int:
    cfg = config_from_args(args)
    corpus = _load_corpus(args)
    artifacts = _artifacts_for_run(cfg, corpus, args.index_dir)
    ranked, _ = run_query(cfg, artifacts, args.query)
    for rank, (doc_id, score) in enumerate(ranked, start=1):
        title = corpus.get(doc_id).title
        print(f"{rank}\t{doc_id}\t{score:.6f}\t{title}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = config_from_args(args)
    corpus = _load_corpus(args)
    queries = _load_queries(args)
    if not queries.has_gold:
        raise DataError("evaluate requires gold doc_ids on every query "
                        "(use `submit` for blind sets)")
    artifacts = _artifacts_for_run(cfg, corpus, args.index_dir)
    run = run_pipeline(cfg, corpus, queries, artifacts=artifacts)
    print(format_table([run.report]), end="")
    if args.report:
        Path(args.report).write_text(run.report.to_json(), encoding="utf-8")
        _info(f"wrote report to {args.report}")
    if args.submission:
        write_submission([(qid, [d for d, _s in ranked])
                          for qid, ranked in run.results], args.submission)
        _info(f"wrote submission to {args.submission}")
    return 0


def cmd_ablate(args) -> int:
    cfg = config_from_args(args)
    corpus = _load_corpus(args)
    queries = _load_queries(args)
    grid = standard_ablation_grid(cfg)
    reports = run_ablation(grid, corpus, queries)
    print(format_table(reports), end="")
    if args.report:
        payload = "[\n" + ",\n".join(r.to_json().rstrip("\n") for r in reports) + "\n]\n"
        Path(args.report).write_text(payload, encoding="utf-8")
        _info(f"wrote reports to {args.report}")
    return 0


def cmd_submit(args) -> int:
    cfg = config_from_args(args)
    corpus = _load_corpus(args)
    queries = _load_queries(args)
    artifacts = _artifacts_for_run(cfg, corpus, args.index_dir)
    run = run_pipeline(cfg, corpus, queries, artifacts=artifacts)
    write_submission([(qid, [d for d, _s in ranked])
                      for qid, ranked in run.results], args.out)
    _info(f"wrote {len(run.results)} predictions to {args.out}")
    if run.report is not None:
        print(format_table([run.report]), end="")
    return 0


def cmd_augment(args) -> int:
    gen = Generator(GenerationProviderConfig(
        mode=args.provider,
        endpoint=args.endpoint or default_endpoint(),
        fixture_path=args.fixtures))
    if args.mode in ("rewrite", "expand", "hyde"):
        if not args.tweet:
            raise UsageError(f"--tweet is required for mode {args.mode}")
        if args.mode == "rewrite":
            print(rewrite_query(gen, args.tweet))
        elif args.mode == "expand":
            print(expand_query(gen, args.tweet))
        else:
            print(hyde_document(gen, args.tweet))
        return 0
    # ad: emit one JSONL record of variants per document
    if not args.corpus:
        raise UsageError("--corpus is required for mode ad")
    corpus = _load_corpus(args)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for d in corpus.documents:
            variants = augment_corpus(gen, d)
            out.write(json.dumps({"doc_id": d.doc_id, **variants},
                                 ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def build_parser() -> Parser:
    parser = Parser(prog="papertrail",
                    description="Hybrid retrieval of scientific sources for social media posts")
    parser.add_argument("--version", action="version", version=f"papertrail {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p_index = sub.add_parser("index", help="build and persist retrieval indexes")
    p_index.add_argument("kind", choices=["lexical", "dense"])
    _add_corpus_args(p_index)
    p_index.add_argument("--out", required=True, help="output directory")
    p_index.add_argument("--merges", help="BPE merges file (dense hash provider)")
    p_index.add_argument("--provider", dest="embedding_provider_alias",
                         choices=["hash", "file", "service"],
                         help="alias for --embedding-provider")
    p_index.add_argument("--endpoint", dest="embedding_endpoint_alias",
                         help="alias for --embedding-endpoint")
    p_index.add_argument("--vectors", dest="embedding_path_alias",
                         help="alias for --embedding-path (file provider)")
    _add_run_args(p_index)
    p_index.set_defaults(func=cmd_index)

    p_search = sub.add_parser("search", help="run one query through the pipeline")
    _add_corpus_args(p_search)
    p_search.add_argument("--query", required=True, help="social media post text")
    _add_run_args(p_search)
    p_search.set_defaults(func=cmd_search)

    p_eval = sub.add_parser("evaluate", help="score a gold query set")
    _add_corpus_args(p_eval)
    p_eval.add_argument("--queries", required=True)
    p_eval.add_argument("--query-format", choices=["jsonl", "tsv"], default=None)
    p_eval.add_argument("--report", help="write the JSON report here")
    p_eval.add_argument("--submission", help="also write a submission TSV")
    _add_run_args(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_ablate = sub.add_parser("ablate", help="run the four-stage ablation table")
    _add_corpus_args(p_ablate)
    p_ablate.add_argument("--queries", required=True)
    p_ablate.add_argument("--query-format", choices=["jsonl", "tsv"], default=None)
    p_ablate.add_argument("--report", help="write the JSON reports here")
    _add_run_args(p_ablate)
    p_ablate.set_defaults(func=cmd_ablate)

    p_submit = sub.add_parser("submit", help="write predictions for a query set")
    _add_corpus_args(p_submit)
    p_submit.add_argument("--queries", required=True)
    p_submit.add_argument("--query-format", choices=["jsonl", "tsv"], default=None)
    p_submit.add_argument("--out", required=True, help="submission TSV path")
    _add_run_args(p_submit)
    p_submit.set_defaults(func=cmd_submit)

    p_aug = sub.add_parser("augment", help="query/corpus augmentation via a generator")
    p_aug.add_argument("--mode", choices=[m for m in AUGMENT_MODES if m != "none"],
                       required=True)
    p_aug.add_argument("--provider", choices=["canned", "service"], default="canned")
    p_aug.add_argument("--fixtures", help="canned fixture JSONL")
    p_aug.add_argument("--endpoint", help="generation service endpoint")
    p_aug.add_argument("--tweet", help="post text (rewrite/expand/hyde)")
    p_aug.add_argument("--corpus", help="corpus file (ad mode)")
    p_aug.add_argument("--format", choices=["jsonl", "tsv"], default=None)
    p_aug.add_argument("--out", help="output path (ad mode; default stdout)")
    p_aug.set_defaults(func=cmd_augment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, ValueError) as exc:
        # ValueError covers config validation (bad parameter ranges, modes)
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
