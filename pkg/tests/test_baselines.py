import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ore import baselines
from ore.baselines import FusionConfig, cc_fuse, exhaustive, gar_style, plain_rerank, quam_style, rrf
from ore.collection import Collection
from ore.errors import RefusalError, ValidationError
from ore.graph import AffinityGraph
from ore.io import Qrels, Query
from ore.lexical import build_index
from ore.rankers import BudgetLedger, graded_oracle

from helpers import docs, synth_collection


def test_rrf_doc_first_in_both_lists():
    fused = dict(rrf([[("d", 3.0), ("e", 1.0)], [("d", 0.9)]]))
    assert fused["d"] == pytest.approx(2 / 61)
    assert fused["e"] == pytest.approx(1 / 62)


def test_rrf_brute_force():
    lists = [[("a", 1), ("b", 1), ("c", 1)], [("c", 1), ("d", 1)], [("b", 1)]]
    expect = {}
    for ranked in lists:
        for r, (d, _) in enumerate(ranked, 1):
            expect[d] = expect.get(d, 0) + 1 / (60 + r)
    assert dict(rrf(lists)) == pytest.approx(expect)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.sampled_from("abcdefgh"), unique=True, max_size=8), min_size=1, max_size=4),
       st.randoms())
def test_rrf_ignores_list_order(lists, rnd):
    ranked = [[(d, 1.0) for d in lst] for lst in lists]
    shuffled = ranked[:]
    rnd.shuffle(shuffled)
    a, b = dict(rrf(ranked)), dict(rrf(shuffled))
    assert a.keys() == b.keys()
    assert all(a[d] == pytest.approx(b[d]) for d in a)


def test_cc_hand_arithmetic():
    a = [("x", 10.0), ("y", 5.0), ("z", 0.0)]
    b = [("y", 2.0), ("w", 1.0)]
    fused = dict(cc_fuse(a, b, 0.5))
    assert fused == pytest.approx({"x": 0.5, "y": 0.75, "z": 0.0, "w": 0.0})


def test_cc_lambda_endpoints_reproduce_inputs():
    a = [("x", 3.0), ("y", 2.0), ("z", 1.0)]
    b = [("z", 9.0), ("y", 4.0), ("x", 1.0)]
    assert [d for d, _ in cc_fuse(a, b, 1.0)] == ["x", "y", "z"]
    assert [d for d, _ in cc_fuse(a, b, 0.0)] == ["z", "y", "x"]


def test_fusion_config_validation():
    with pytest.raises(ValidationError):
        FusionConfig(rrf_k=0)
    with pytest.raises(ValidationError):
        FusionConfig(cc_lambda=1.5)
    with pytest.raises(ValidationError):
        FusionConfig(normalization="z-score")
    with pytest.raises(ValidationError):
        cc_fuse([], [], -0.1)


def test_plain_rerank_scores_head_only():
    data, coll = synth_collection(2, n_docs=300, n_queries=3, vocab_size=1200, decoys_per_query=30)
    qid = data.queries[0].query_id
    first = coll.bm25_run(qid, 100)
    r = plain_rerank(coll, qid, first, graded_oracle(data.qrels, 0.25), BudgetLedger(100, 16, 2))
    assert set(r.scored) == {d for d, _ in first[:32]}
    assert [d for d, _ in r.ranked][32:] == [d for d, _ in first[32:100]]


def six_docs():
    corpus = docs(a="t t", x="t u", y="v", p="w", r="w v", s="u u")
    graph = AffinityGraph(2, {"a": [("x", 0.9), ("y", 0.5)], "x": [("p", 0.1)], "y": [("a", 0.9)],
                              "p": [("r", 0.2)], "r": [("s", 0.3)], "s": [("p", 0.4)]})
    coll = Collection.create(build_index(corpus), [Query("q", "t")], None, None, graph)
    return coll, graded_oracle(Qrels({("q", "a"): 1}))


def test_quam_and_gar_pick_different_neighbours():
    coll, oracle = six_docs()
    first = coll.bm25_run("q", 3)
    gar = gar_style(coll, "q", first, oracle, BudgetLedger(3, 1))
    quam = quam_style(coll, "q", first, oracle, BudgetLedger(3, 1))
    g = [d.doc_ids for d in gar.diagnostics]
    q = [d.doc_ids for d in quam.diagnostics]
    assert g[:2] == [("a",), ("x",)]  # strongest outgoing edge from the scored doc
    assert q[:2] == [("a",), ("y",)]  # y points back at the scored set
    assert g != q


def test_alternation_fills_from_other_source():
    coll, oracle = six_docs()
    r = gar_style(coll, "q", coll.bm25_run("q", 6), oracle, BudgetLedger(6, 4))
    assert r.calls_used == 6
    seen = [d for diag in r.diagnostics for d in diag.doc_ids]
    assert len(seen) == len(set(seen))


def test_empty_graph_gar_equals_rerank():
    data, coll = synth_collection(2, with_graph=False, n_docs=300, n_queries=3, vocab_size=1200,
                                  decoys_per_query=30)
    for q in data.queries:
        first = coll.bm25_run(q.query_id, 100)
        for fn in (gar_style, quam_style):
            a = fn(coll, q.query_id, first, graded_oracle(data.qrels, 0.25), BudgetLedger(100, 16))
            b = plain_rerank(coll, q.query_id, first, graded_oracle(data.qrels, 0.25), BudgetLedger(100, 16))
            assert a.ranked == b.ranked


def test_exhaustive_refuses_large_collections():
    coll, oracle = six_docs()
    with pytest.raises(RefusalError):
        exhaustive(coll, "q", oracle, 3, cap=5)
    r = exhaustive(coll, "q", oracle, 3, cap=5, override=True)
    assert r.calls_used == 6 and r.ranked[0][0] == "a" and len(r.ranked) == 3


def test_fused_first_stage_methods():
    from ore.config import Settings
    data, coll = synth_collection(2, n_docs=300, n_queries=2, vocab_size=1200, decoys_per_query=30)
    qid = data.queries[0].query_id
    s = Settings()
    bm, de = coll.bm25_run(qid, s.hybrid_depth), coll.dense_run(qid, s.hybrid_depth)
    assert baselines.fused_first_stage(coll, qid, s, "rrf") == rrf([bm, de], s.rrf_k)
    assert baselines.fused_first_stage(coll, qid, s, "cc") == cc_fuse(bm, de, s.cc_lambda)


def test_rrf_rejects_bad_k():
    with pytest.raises(ValidationError):
        rrf([], 0)
