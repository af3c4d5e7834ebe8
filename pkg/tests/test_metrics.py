import random
from fractions import Fraction

import pytest

from papertrail.errors import DataError
from papertrail.metrics import (EvalReport, build_report, format_table,
                                mrr_at_k, reciprocal_rank_at_k, success_at_k)


def test_reciprocal_rank_examples():
    assert reciprocal_rank_at_k(["g", "x", "y"], "g", 5) == 1.0
    assert reciprocal_rank_at_k(["x", "y", "g"], "g", 5) == pytest.approx(1 / 3)
    assert reciprocal_rank_at_k(["a", "b", "c", "d", "e", "g"], "g", 5) == 0.0


def test_reciprocal_rank_rejects_duplicates():
    with pytest.raises(DataError):
        reciprocal_rank_at_k(["a", "a"], "a", 5)


def test_mrr_examples():
    results = [["g1"], ["x", "y", "g2"], ["x", "y"]]
    golds = ["g1", "g2", "g3"]
    assert mrr_at_k(results, golds, 5) == pytest.approx(4 / 9, abs=1e-15)
    assert mrr_at_k([["a"], ["b"]], ["a", "b"], 5) == 1.0
    assert mrr_at_k([["x"], ["y"]], ["a", "b"], 5) == 0.0


def test_mrr_requires_golds():
    with pytest.raises(DataError, match="gold"):
        mrr_at_k([["a"], ["b"]], ["a", None], 5)
    with pytest.raises(DataError):
        mrr_at_k([], [], 5)


def test_success_examples():
    # golds at ranks 1, 3, 40 with k=30 -> 2/3
    results = [
        ["g1"] + [f"f{i}" for i in range(49)],
        ["f0", "f1", "g2"] + [f"h{i}" for i in range(47)],
        [f"z{i}" for i in range(39)] + ["g3"],
    ]
    golds = ["g1", "g2", "g3"]
    assert success_at_k(results, golds, 30) == pytest.approx(2 / 3, abs=1e-15)
    assert success_at_k(results, golds, 40) == 1.0
    assert success_at_k(results, golds, 0) == 0.0


def test_mrr_and_success_property_relations():
    rng = random.Random(123)
    pool = [f"d{i}" for i in range(20)]
    results, golds = [], []
    for _ in range(200):
        ranked = rng.sample(pool, rng.randrange(1, 10))
        results.append(ranked)
        golds.append(rng.choice(pool))
    ks = range(1, 11)
    mrrs = {k: mrr_at_k(results, golds, k) for k in ks}
    succ = {k: success_at_k(results, golds, k) for k in ks}
    for k in ks:
        assert mrrs[k] <= succ[k] + 1e-15
        if k > 1:
            assert mrrs[k - 1] <= mrrs[k] + 1e-15
            assert succ[k - 1] <= succ[k] + 1e-15


def test_mrr_matches_rational_oracle():
    rng = random.Random(9)
    pool = [f"d{i}" for i in range(12)]
    results = [rng.sample(pool, rng.randrange(1, 8)) for _ in range(100)]
    golds = [rng.choice(pool) for _ in range(100)]
    for k in (1, 3, 5):
        exact = Fraction(0)
        for ranked, gold in zip(results, golds):
            head = ranked[:k]
            if gold in head:
                exact += Fraction(1, head.index(gold) + 1)
        exact /= len(results)
        assert mrr_at_k(results, golds, k) == pytest.approx(float(exact), abs=1e-12)


def test_build_report_fields():
    report = build_report(
        ["q1", "q2"], [["a", "b"], ["x"]], ["b", "y"], "cfgfp",
        mrr_ks=(1, 5), success_ks=(1, 5))
    assert report.mrr[1] == 0.0
    assert report.mrr[5] == pytest.approx(0.25)
    assert report.per_query[0].gold_rank == 2
    assert report.per_query[1].gold_rank is None
    assert report.config_fingerprint == "cfgfp"
    # invariants
    assert report.mrr[1] <= report.mrr[5]
    for k in (1, 5):
        assert report.mrr[k] <= report.success[k]


def test_report_json_is_stable():
    r1 = build_report(["q"], [["a"]], ["a"], "fp", mrr_ks=(1,), success_ks=(1,))
    r2 = build_report(["q"], [["a"]], ["a"], "fp", mrr_ks=(1,), success_ks=(1,))
    assert r1.to_json() == r2.to_json()


def test_format_table_marks_missing_cutoffs():
    full = build_report(["q"], [["a"]], ["a"], "fp", mrr_ks=(1, 5), success_ks=(30,))
    full.label = "lexical"
    short = build_report(["q"], [["a"]], ["a"], "fp", mrr_ks=(1, 5), success_ks=(5,))
    short.label = "rerank"
    table = format_table([full, short])
    lines = table.splitlines()
    assert "MRR@1" in lines[0] and "P@30" in lines[0]
    assert lines[1].startswith("lexical")
    assert "-" in lines[2]  # rerank row has no P@30
