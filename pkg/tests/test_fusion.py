import random

import pytest

from papertrail.bpe import train_bpe
from papertrail.corpus import Corpus, Document
from papertrail.errors import DataError
from papertrail.fusion import (Candidate, RerankerConfig, RrfParams,
                               merge_candidates, overlap_stub_score, rerank,
                               rrf_fuse)

from conftest import word_vocab


def lex_list(*ids):
    return [Candidate(d, frozenset({"lexical"}), lexical_rank=i, lexical_score=float(10 - i))
            for i, d in enumerate(ids, start=1)]


def sem_list(*ids):
    return [Candidate(d, frozenset({"semantic"}), semantic_rank=i, semantic_score=1.0 / i)
            for i, d in enumerate(ids, start=1)]


def test_candidate_invariants():
    with pytest.raises(ValueError):
        Candidate("x", frozenset())
    with pytest.raises(ValueError):
        Candidate("x", frozenset({"lexical"}))  # rank missing
    with pytest.raises(ValueError):
        Candidate("x", frozenset({"lexical"}), lexical_rank=0)
    with pytest.raises(ValueError):
        Candidate("x", frozenset({"semantic"}), semantic_rank=1, lexical_rank=2)


def test_merge_union_with_both_ranks():
    merged = merge_candidates(lex_list("a", "b"), sem_list("b", "c"))
    by_id = {c.doc_id: c for c in merged}
    assert set(by_id) == {"a", "b", "c"}
    assert by_id["b"].sources == frozenset({"lexical", "semantic"})
    assert by_id["b"].lexical_rank == 2 and by_id["b"].semantic_rank == 1
    assert by_id["a"].sources == frozenset({"lexical"})
    assert by_id["c"].sources == frozenset({"semantic"})


def test_merge_order_semantic_first_then_lexical_only():
    merged = merge_candidates(lex_list("a", "b"), sem_list("b", "c"))
    assert [c.doc_id for c in merged] == ["b", "c", "a"]


def test_merge_disjoint_130():
    lex = lex_list(*[f"l{i}" for i in range(30)])
    sem = sem_list(*[f"s{i}" for i in range(100)])
    merged = merge_candidates(lex, sem)
    assert len(merged) == 130


def test_merge_empty_branch():
    merged = merge_candidates([], sem_list("x"))
    assert [c.doc_id for c in merged] == ["x"]
    assert merge_candidates([], []) == []


def test_merge_rejects_duplicates_within_branch():
    dup = lex_list("a") + lex_list("a")
    with pytest.raises(DataError, match="lexical"):
        merge_candidates(dup, [])


def test_merge_membership_equals_union():
    rng = random.Random(11)
    pool = [f"p{i}" for i in range(40)]
    for _ in range(200):
        lex_ids = rng.sample(pool, rng.randrange(0, 10))
        sem_ids = rng.sample(pool, rng.randrange(0, 20))
        merged = merge_candidates(lex_list(*lex_ids), sem_list(*sem_ids))
        assert {c.doc_id for c in merged} == set(lex_ids) | set(sem_ids)


def test_overlap_stub_identical_and_disjoint():
    vocab = word_vocab(["alpha", "beta", "gamma", "delta"])
    doc_same = Document("d", "alpha beta", "")
    assert overlap_stub_score("alpha beta", doc_same, vocab) == 1.0
    doc_disjoint = Document("d2", "gamma delta", "")
    assert overlap_stub_score("alpha beta", doc_disjoint, vocab) == 0.0


def test_overlap_stub_half():
    vocab = word_vocab(["aa", "bb", "cc", "dd", "xx"])
    doc = Document("d", "aa bb", "xx")
    assert overlap_stub_score("aa bb cc dd", doc, vocab) == pytest.approx(0.5)


def test_overlap_stub_empty_query():
    vocab = word_vocab(["aa"])
    assert overlap_stub_score("", Document("d", "aa", ""), vocab) == 0.0


def corpus_for_rerank():
    docs = (
        Document("full", "alpha beta gamma", ""),
        Document("half", "alpha beta", ""),
        Document("none", "delta epsilon", ""),
    )
    return Corpus(documents=docs), word_vocab(
        ["alpha", "beta", "gamma", "delta", "epsilon"])


def test_rerank_full_overlap_wins():
    corpus, vocab = corpus_for_rerank()
    candidates = sem_list("none", "half", "full")
    cfg = RerankerConfig(mode="overlap_stub")
    ranked = rerank(cfg, "alpha beta gamma", candidates, corpus, top_n=5, vocab=vocab)
    assert ranked[0][0] == "full"
    assert ranked[0][1] == pytest.approx(1.0)
    assert len(ranked) == 3


def test_rerank_single_candidate():
    corpus, vocab = corpus_for_rerank()
    cfg = RerankerConfig(mode="overlap_stub")
    ranked = rerank(cfg, "anything", sem_list("half"), corpus, top_n=5, vocab=vocab)
    assert [d for d, _s in ranked] == ["half"]


def test_rerank_truncates_to_top_n():
    corpus, vocab = corpus_for_rerank()
    cfg = RerankerConfig(mode="overlap_stub")
    ranked = rerank(cfg, "alpha", sem_list("full", "half", "none"), corpus,
                    top_n=2, vocab=vocab)
    assert len(ranked) == 2


def test_rerank_ignores_branch_order():
    corpus, vocab = corpus_for_rerank()
    cfg = RerankerConfig(mode="overlap_stub")
    a = rerank(cfg, "alpha beta gamma", sem_list("none", "half", "full"),
               corpus, top_n=3, vocab=vocab)
    b = rerank(cfg, "alpha beta gamma", sem_list("full", "none", "half"),
               corpus, top_n=3, vocab=vocab)
    assert a == b


def test_rerank_unknown_candidate_id():
    corpus, vocab = corpus_for_rerank()
    cfg = RerankerConfig(mode="overlap_stub")
    with pytest.raises(DataError, match="ghost"):
        rerank(cfg, "alpha", sem_list("ghost"), corpus, vocab=vocab)


def test_rerank_tie_break_by_doc_id():
    docs = (Document("bbb", "alpha", ""), Document("aaa", "alpha", ""))
    corpus = Corpus(documents=docs)
    vocab = word_vocab(["alpha"])
    cfg = RerankerConfig(mode="overlap_stub")
    ranked = rerank(cfg, "alpha", sem_list("bbb", "aaa"), corpus, vocab=vocab)
    assert [d for d, _s in ranked] == ["aaa", "bbb"]


def test_rrf_hand_example():
    fused = rrf_fuse([["d1", "d2", "d3"], ["d2", "d4", "d1"]], RrfParams(rank_constant=20))
    assert [d for d, _s in fused] == ["d2", "d1", "d4", "d3"]
    assert fused[0][1] == pytest.approx(1 / 22 + 1 / 21, abs=1e-12)


def test_rrf_single_list_preserves_order():
    order = [f"x{i}" for i in range(50)]
    fused = rrf_fuse([order])
    assert [d for d, _s in fused] == order


def test_rrf_double_membership_doubles_score():
    single = rrf_fuse([["a"]])
    double = rrf_fuse([["a"], ["a"]])
    assert double[0][1] == pytest.approx(2 * single[0][1], abs=1e-15)


def test_rrf_list_order_invariance():
    lists = [["a", "b"], ["c", "a", "d"], ["b"]]
    forward = rrf_fuse(lists)
    backward = rrf_fuse(list(reversed(lists)))
    assert forward == backward


def test_rrf_window_cuts_contributions():
    params = RrfParams(rank_constant=20, window=2)
    fused = rrf_fuse([["a", "b", "c"]], params)
    assert [d for d, _s in fused] == ["a", "b"]


def test_rrf_rejects_duplicates():
    with pytest.raises(DataError):
        rrf_fuse([["a", "a"]])


def test_rrf_against_brute_force():
    rng = random.Random(77)
    pool = [f"d{i}" for i in range(25)]
    for _ in range(100):
        lists = [rng.sample(pool, rng.randrange(0, 15))
                 for _ in range(rng.randrange(1, 4))]
        kappa = rng.uniform(0.5, 80)
        window = rng.randrange(1, 20)
        params = RrfParams(rank_constant=kappa, window=window)
        # oracle: plain dict summation
        expected = {}
        for ranked in lists:
            for r, d in enumerate(ranked, start=1):
                if r <= window:
                    expected[d] = expected.get(d, 0.0) + 1.0 / (kappa + r)
        expected_order = sorted(expected.items(), key=lambda kv: (-kv[1], kv[0]))
        got = rrf_fuse(lists, params)
        assert [d for d, _s in got] == [d for d, _s in expected_order]
        for (gd, gs), (ed, es) in zip(got, expected_order):
            assert gs == pytest.approx(es, abs=1e-12)


def test_rrf_params_validation():
    with pytest.raises(ValueError):
        RrfParams(rank_constant=0)
    with pytest.raises(ValueError):
        RrfParams(window=0)


def test_reranker_config_validation():
    with pytest.raises(ValueError):
        RerankerConfig(mode="service")
    with pytest.raises(ValueError):
        RerankerConfig(mode="llm")
    with pytest.raises(ValueError):
        RerankerConfig(batch_size=0)
