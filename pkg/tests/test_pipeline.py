import json

import pytest

from papertrail.augment import (HYDE_FORMAT_INSTRUCTIONS, fill_template,
                                input_hash)
from papertrail.corpus import Corpus, Document, Query, QuerySet
from papertrail.errors import DataError, ProviderError
from papertrail.pipeline import (RunConfig, build_artifacts, run_ablation,
                                 run_pipeline, standard_ablation_grid,
                                 write_submission)

from conftest import planted_corpus


def queryset_for(corpus, texts_and_golds):
    queries = tuple(Query(f"q{i}", text, gold)
                    for i, (text, gold) in enumerate(texts_and_golds))
    return QuerySet(queries=queries, has_gold=all(g for _t, g in texts_and_golds))


def planted_queryset(corpus):
    return queryset_for(corpus, [(d.title, d.doc_id) for d in corpus.documents])


def desk_config(**overrides):
    base = dict(vocab_size=1200, embedding_dim=64, mode="rerank")
    base.update(overrides)
    return RunConfig(**base)


def test_planted_corpus_perfect_mrr():
    corpus = planted_corpus(n_docs=12)
    queries = planted_queryset(corpus)
    run = run_pipeline(desk_config(), corpus, queries)
    assert run.report is not None
    assert run.report.mrr[5] == 1.0
    assert run.report.mrr[1] == 1.0
    for qid, ranked in run.results:
        assert len(ranked) == 5


def test_run_is_deterministic():
    corpus = planted_corpus(n_docs=10)
    queries = planted_queryset(corpus)
    cfg = desk_config()
    a = run_pipeline(cfg, corpus, queries)
    b = run_pipeline(cfg, corpus, queries)
    assert a.results == b.results
    assert a.report.to_json() == b.report.to_json()
    assert a.config_fingerprint == b.config_fingerprint


def test_config_fingerprint_stable_and_distinct():
    assert desk_config().fingerprint() == desk_config().fingerprint()
    assert desk_config().fingerprint() != desk_config(k1=1.2).fingerprint()


def test_rrf_mode_runs():
    corpus = planted_corpus(n_docs=10)
    queries = planted_queryset(corpus)
    run = run_pipeline(desk_config(mode="rrf"), corpus, queries)
    assert run.report.mrr[5] > 0.0
    for _qid, ranked in run.results:
        assert len(ranked) <= 5


def test_candidate_success_reported_for_fused_modes():
    corpus = planted_corpus(n_docs=10)
    queries = planted_queryset(corpus)
    run = run_pipeline(desk_config(), corpus, queries)
    assert run.report.candidate_success == 1.0  # lexical branch plants the gold


def test_branch_modes_report_deeper_cutoffs():
    corpus = planted_corpus(n_docs=10)
    queries = planted_queryset(corpus)
    run = run_pipeline(desk_config(mode="lexical"), corpus, queries)
    assert set(run.report.success) == {30, 100}
    assert run.report.candidate_success is None


def test_no_report_without_golds():
    corpus = planted_corpus(n_docs=6)
    queries = queryset_for(corpus, [(corpus.documents[0].title, None)])
    run = run_pipeline(desk_config(), corpus, queries)
    assert run.report is None
    assert len(run.results) == 1


def test_failed_query_aborts_with_id(tmp_path):
    corpus = planted_corpus(n_docs=6)
    queries = planted_queryset(corpus)
    fixtures = tmp_path / "empty.jsonl"
    fixtures.write_text("", encoding="utf-8")
    cfg = desk_config(augment="rewrite", generation_mode="canned",
                      generation_fixture_path=str(fixtures))
    with pytest.raises(ProviderError, match="query 'q0'"):
        run_pipeline(cfg, corpus, queries)


def test_rewrite_changes_lexical_query(tmp_path):
    corpus = planted_corpus(n_docs=8)
    target = corpus.documents[3]
    other = corpus.documents[5]
    # generator rewrites the (gibberish) post into the target's title
    fixtures = tmp_path / "fx.jsonl"
    tweet = "informal chatter"
    with open(fixtures, "w", encoding="utf-8") as f:
        key = input_hash("rewrite", fill_template("rewrite", tweet=tweet))
        f.write(json.dumps({"input_hash": key, "text": target.title}) + "\n")
    queries = queryset_for(corpus, [(tweet, target.doc_id)])
    cfg = desk_config(mode="lexical", augment="rewrite",
                      generation_fixture_path=str(fixtures))
    run = run_pipeline(cfg, corpus, queries)
    assert run.results[0][1][0][0] == target.doc_id
    assert other.doc_id not in [d for d, _s in run.results[0][1]]


def test_hyde_substitutes_semantic_query(tmp_path):
    corpus = planted_corpus(n_docs=8)
    target = corpus.documents[2]
    tweet = "informal chatter"
    prompt = fill_template("hyde", tweet=tweet,
                           format_instructions=HYDE_FORMAT_INSTRUCTIONS)
    fixtures = tmp_path / "fx.jsonl"
    with open(fixtures, "w", encoding="utf-8") as f:
        f.write(json.dumps({
            "input_hash": input_hash("hyde", prompt),
            "text": f"Title: {target.title}\nAbstract: {target.abstract}",
        }) + "\n")
    queries = queryset_for(corpus, [(tweet, target.doc_id)])
    cfg = desk_config(mode="semantic", augment="hyde",
                      generation_fixture_path=str(fixtures))
    run = run_pipeline(cfg, corpus, queries)
    # the hypothetical document is (near) identical to the target document
    assert run.results[0][1][0][0] == target.doc_id


def test_ad_mode_dedups_doc_ids(tmp_path):
    from papertrail.augment import PLAIN_FORMAT_INSTRUCTIONS
    corpus = planted_corpus(n_docs=4)
    fixtures = tmp_path / "fx.jsonl"
    with open(fixtures, "w", encoding="utf-8") as f:
        for d in corpus.documents:
            slots = {"title": d.title, "page_content": d.abstract,
                     "format_instructions": PLAIN_FORMAT_INSTRUCTIONS}
            for tpl, text in (("doc_summary", f"summary of {d.title}"),
                              ("doc_tweet", f"tweet about {d.title}")):
                f.write(json.dumps({
                    "input_hash": input_hash(tpl, fill_template(tpl, **slots)),
                    "text": text}) + "\n")
    queries = planted_queryset(corpus)
    cfg = desk_config(mode="semantic", augment="ad",
                      generation_fixture_path=str(fixtures))
    run = run_pipeline(cfg, corpus, queries)
    for _qid, ranked in run.results:
        ids = [d for d, _s in ranked]
        assert len(ids) == len(set(ids))
        assert len(ids) <= len(corpus)


def test_ablation_grid_order_and_single_row():
    corpus = planted_corpus(n_docs=8)
    queries = planted_queryset(corpus)
    cfg = desk_config()
    reports = run_ablation(standard_ablation_grid(cfg), corpus, queries)
    assert [r.label for r in reports] == ["lexical", "semantic", "rrf", "rerank"]
    single = run_ablation([("only", cfg)], corpus, queries)
    direct = run_pipeline(cfg, corpus, queries, label="only")
    assert single[0].to_json() == direct.report.to_json()


def test_ablation_requires_golds():
    corpus = planted_corpus(n_docs=4)
    queries = queryset_for(corpus, [(corpus.documents[0].title, None)])
    with pytest.raises(DataError):
        run_ablation([("x", desk_config())], corpus, queries)


def test_merged_success_at_least_branch_success():
    corpus = planted_corpus(n_docs=20)
    queries = planted_queryset(corpus)
    cfg = desk_config()
    artifacts = build_artifacts(cfg, corpus)
    lex_run = run_pipeline(desk_config(mode="lexical"), corpus, queries,
                           artifacts=artifacts)
    sem_run = run_pipeline(desk_config(mode="semantic"), corpus, queries,
                           artifacts=artifacts)
    fused = run_pipeline(cfg, corpus, queries, artifacts=artifacts)
    assert fused.report.candidate_success >= max(
        lex_run.report.success[30], sem_run.report.success[100]) - 1e-12


def test_write_submission_format(tmp_path):
    path = tmp_path / "submission.tsv"
    write_submission([("q1", ["a", "b"]), ("q2", ["c"])], path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "post_id\tpreds"
    assert lines[1] == "q1\t['a', 'b']"
    assert lines[2] == "q2\t['c']"


def test_write_submission_rejects_empty(tmp_path):
    path = tmp_path / "s.tsv"
    with pytest.raises(DataError):
        write_submission([], path)
    assert not path.exists()
    with pytest.raises(DataError, match="q1"):
        write_submission([("q1", [])], path)


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(mode="bogus")
    with pytest.raises(ValueError):
        RunConfig(augment="bogus")
