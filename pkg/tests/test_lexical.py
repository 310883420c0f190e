import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ore.errors import UnknownIdError, ValidationError
from ore.io import Document
from ore.lexical import (ExpandedQuery, bm25_dd, bm25_expanded, bm25_qd, build_index, dumps_index, load_index,
                         retrieve, rm3_expand, save_index, score_all, tokenize)

from helpers import docs


def oracle_bm25(corpus: dict[str, str], query: dict[str, float], doc: str, k1=0.9, b=0.4) -> float:
    """Plain-Python Okapi BM25 over whitespace tokens; query weights multiply each term."""
    toks = {d: t.lower().split() for d, t in corpus.items()}
    n = len(toks)
    avg = sum(len(t) for t in toks.values()) / n
    tf = Counter(toks[doc])
    total = 0.0
    for term, w in query.items():
        df = sum(1 for t in toks.values() if term in t)
        if df == 0 or tf[term] == 0:
            continue
        idf = math.log((n - df + 0.5) / (df + 0.5) + 1)
        f = tf[term]
        total += w * idf * f * (k1 + 1) / (f + k1 * (1 - b + b * len(toks[doc]) / avg))
    return total


def random_corpus(rng: random.Random, n=5, vocab="abcdefg"):
    return {f"d{i}": " ".join(rng.choice(vocab) for _ in range(rng.randint(1, 8))) for i in range(n)}


def test_postings_hand_count():
    idx = build_index(docs(d1="a a b", d2="b"))
    assert idx.postings == {"a": [("d1", 2)], "b": [("d1", 1), ("d2", 1)]}
    assert idx.avg_doc_len == 2.0
    assert idx.n_docs == 2


def test_singleton_index():
    idx = build_index(docs(d="x"))
    assert idx.avg_doc_len == 1.0 and idx.n_docs == 1


def test_build_is_deterministic():
    corpus = docs(d1="a b c", d2="c d", d3="a")
    assert dumps_index(build_index(corpus)) == dumps_index(build_index(corpus))


def test_empty_corpus_rejected():
    with pytest.raises(ValidationError):
        build_index([])


def test_index_invariants():
    idx = build_index(docs(d1="a b b", d2="c", d3="a c c c"))
    lengths = idx.doc_lengths
    assert idx.avg_doc_len == pytest.approx(sum(lengths.values()) / len(lengths))
    for plist in idx.postings.values():
        assert all(d in lengths for d, _ in plist)
    assert idx.n_docs == len(lengths)
    assert idx.doc_term_vectors["d3"] == {"a": 1, "c": 3}


def test_tokenize_lowercases_and_splits():
    assert tokenize("Hello, WORLD_x-2") == ["hello", "world", "x", "2"]


def test_bm25_worked_example():
    corpus = {"d1": "a b", "d2": "a a", "d3": "c"}
    idx = build_index(docs(**corpus))
    idf = math.log(1.6)
    avg = 5 / 3
    expected = idf * 1.9 / (1 + 0.9 * (0.6 + 0.4 * 2 / avg))
    assert bm25_qd(idx, ["a"], "d1") == pytest.approx(expected, abs=1e-12)
    assert bm25_qd(idx, ["a"], "d1") == pytest.approx(oracle_bm25(corpus, {"a": 1}, "d1"), abs=1e-12)


@pytest.mark.parametrize("seed", range(12))
def test_bm25_matches_oracle(seed):
    rng = random.Random(seed)
    corpus = random_corpus(rng)
    idx = build_index(docs(**corpus))
    query = [rng.choice("abcdefgh") for _ in range(rng.randint(1, 4))]
    for d in corpus:
        assert bm25_qd(idx, query, d) == pytest.approx(oracle_bm25(corpus, Counter(query), d), abs=1e-9)


def test_bm25_zero_iff_no_overlap():
    idx = build_index(docs(d1="a b", d2="c"))
    assert bm25_qd(idx, ["c"], "d1") == 0.0
    assert bm25_qd(idx, ["c"], "d2") > 0.0


def test_bm25_unknown_doc():
    idx = build_index(docs(d1="a"))
    with pytest.raises(UnknownIdError):
        bm25_qd(idx, ["a"], "nope")


def test_doubling_k1_keeps_order_with_unit_tf():
    corpus = docs(d1="t x", d2="t x x x", d3="t", d4="x y")
    idx = build_index(corpus)
    order = lambda k1: sorted(idx.doc_ids, key=lambda d: (-bm25_qd(idx, ["t"], d, k1=k1), d))
    assert order(0.9) == order(1.8)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 6), st.integers(1, 10))
def test_bm25_monotone_in_tf(extra, filler):
    # raising tf while keeping the document length fixed never lowers the score
    low = "t " + "z " * (extra + filler)
    high = "t " * (extra + 1) + "z " * filler
    a = bm25_qd(build_index(docs(d=low, o="q r")), ["t"], "d")
    b = bm25_qd(build_index(docs(d=high, o="q r")), ["t"], "d")
    assert b >= a - 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.text(alphabet="abcd ", min_size=1, max_size=12).filter(str.strip), min_size=2, max_size=6),
       st.randoms(use_true_random=False))
def test_index_is_permutation_invariant(texts, rnd):
    corpus = [Document(f"d{i}", t) for i, t in enumerate(texts)]
    shuffled = corpus[:]
    rnd.shuffle(shuffled)
    a, b = build_index(corpus), build_index(shuffled)
    assert dumps_index(a) == dumps_index(b)
    assert score_all(a, ["a", "b"]).tolist() == score_all(b, ["a", "b"]).tolist()


def test_bm25_dd_self_dominates():
    idx = build_index(docs(d="a b", e="a", f="b", g="c"))
    self_score = bm25_dd(idx, "d", "d")
    assert self_score > 0
    assert all(bm25_dd(idx, "d", t) <= self_score for t in ("e", "f", "g"))
    assert bm25_dd(idx, "d", "g") == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_bm25_dd_matches_oracle_all_pairs(seed):
    corpus = random_corpus(random.Random(100 + seed))
    idx = build_index(docs(**corpus))
    for s in corpus:
        q = Counter(corpus[s].split())
        for t in corpus:
            assert bm25_dd(idx, s, t) == pytest.approx(oracle_bm25(corpus, q, t), abs=1e-9)


def test_retrieve_positive_only_ties_by_id():
    idx = build_index(docs(b="t", a="t", c="u"))
    assert [d for d, _ in retrieve(idx, ["t"], 10)] == ["a", "b"]


def test_rm3_endpoint_orig_weight_one():
    idx = build_index(docs(d1="a a b", d2="c"))
    exp = rm3_expand(idx, ["x", "y", "x"], ["d1"], fb_terms=5, orig_weight=1.0)
    assert {t: w for t, w in exp.weights.items() if w > 0} == pytest.approx({"x": 2 / 3, "y": 1 / 3})


def test_rm3_relevance_model_hand_mle():
    idx = build_index(docs(d1="a a b", d2="c"))
    exp = rm3_expand(idx, ["q"], ["d1"], fb_terms=2, orig_weight=0.0)
    assert {t: w for t, w in exp.weights.items() if w > 0} == pytest.approx({"a": 2 / 3, "b": 1 / 3})


def test_rm3_needs_feedback():
    idx = build_index(docs(d1="a"))
    with pytest.raises(ValidationError):
        rm3_expand(idx, ["a"], [])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6), st.floats(0, 1))
def test_rm3_weights_sum_to_one(seed, fb_terms, lam):
    rng = random.Random(seed)
    corpus = random_corpus(rng, n=6)
    idx = build_index(docs(**corpus))
    query = [rng.choice("abcxyz") for _ in range(rng.randint(1, 3))]
    fb = rng.sample(sorted(corpus), rng.randint(1, 3))
    exp = rm3_expand(idx, query, fb, fb_terms, lam)
    assert sum(exp.weights.values()) == pytest.approx(1.0, abs=1e-9)
    assert all(w >= 0 for w in exp.weights.values())
    assert set(query) <= set(exp.weights)
    assert len(exp.weights) <= fb_terms + len(set(query))


def test_bm25_expanded_point_mass_equals_bm25_qd():
    idx = build_index(docs(d1="a b a", d2="b c", d3="a"))
    for d in idx.doc_ids:
        assert bm25_expanded(idx, ExpandedQuery({"a": 1.0}), d) == bm25_qd(idx, ["a"], d)


def test_bm25_expanded_absent_terms():
    idx = build_index(docs(d1="a b", d2="c"))
    assert bm25_expanded(idx, ExpandedQuery({"c": 0.7, "z": 0.3}), "d1") == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_bm25_expanded_matches_oracle(seed):
    rng = random.Random(200 + seed)
    corpus = random_corpus(rng)
    idx = build_index(docs(**corpus))
    raw = {t: rng.random() for t in rng.sample("abcdefg", 3)}
    weights = {t: w / sum(raw.values()) for t, w in raw.items()}
    for d in corpus:
        expected = sum(w * oracle_bm25(corpus, {t: 1.0}, d) for t, w in weights.items())
        assert bm25_expanded(idx, ExpandedQuery(weights), d) == pytest.approx(expected, abs=1e-9)


def test_index_persistence_round_trip(tmp_path):
    idx = build_index(docs(d1="a b c", d2="c c d"), k1=1.1, b=0.7)
    save_index(idx, tmp_path / "idx.bin")
    back = load_index(tmp_path / "idx.bin")
    assert back.k1 == 1.1 and back.b == 0.7
    assert back.postings == idx.postings
    assert score_all(back, ["c"]).tolist() == score_all(idx, ["c"]).tolist()


def test_index_file_has_magic(tmp_path):
    (tmp_path / "bad").write_bytes(b"garbage")
    from ore.errors import ParseError
    with pytest.raises(ParseError):
        load_index(tmp_path / "bad")
