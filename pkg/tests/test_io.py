import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ore.errors import ParseError, ValidationError
from ore.io import (Document, Qrels, RunEntry, load_config, load_corpus, load_embeddings, load_qrels, load_queries,
                    load_run, run_by_query, validate_run, write_corpus, write_embeddings, write_qrels, write_run)

from helpers import table


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_corpus_in_file_order(tmp_path):
    p = write(tmp_path / "c.jsonl", '{"doc_id": "d1", "text": "a b"}\n{"doc_id": "d2", "text": "c"}\n')
    assert load_corpus(p) == [Document("d1", "a b"), Document("d2", "c")]


def test_load_corpus_duplicate_id(tmp_path):
    p = write(tmp_path / "c.jsonl", '{"doc_id": "d1", "text": "a"}\n{"doc_id": "d1", "text": "b"}\n')
    with pytest.raises(ValidationError, match="d1"):
        load_corpus(p)


def test_load_corpus_empty_file(tmp_path):
    assert load_corpus(write(tmp_path / "c.jsonl", "")) == []


def test_load_corpus_malformed_line_has_line_number(tmp_path):
    p = write(tmp_path / "c.jsonl", '{"doc_id": "d1", "text": "a"}\n{oops\n')
    with pytest.raises(ParseError) as err:
        load_corpus(p)
    assert err.value.line == 2


def test_queries_round_trip(tmp_path):
    p = write(tmp_path / "q.jsonl", '{"query_id": "q1", "text": "apple pie"}\n')
    assert load_queries(p)[0].text == "apple pie"


def test_load_qrels_basic(tmp_path):
    q = load_qrels(write(tmp_path / "qrels", "q1 0 d1 2\n"))
    assert dict(q.grades) == {("q1", "d1"): 2}
    assert q.overwrites == 0


def test_load_qrels_last_wins(tmp_path):
    q = load_qrels(write(tmp_path / "qrels", "q1 0 d1 1\nq1 0 d1 3\n"))
    assert q.grade("q1", "d1") == 3
    assert q.overwrites == 1


def test_load_qrels_bad_grade(tmp_path):
    with pytest.raises(ParseError):
        load_qrels(write(tmp_path / "qrels", "q1 0 d1 x\n"))


def test_qrels_unjudged_is_zero():
    q = Qrels({("q1", "d1"): 2})
    assert q.grade("q1", "d9") == 0
    assert q.relevant("q1", 3) == set()


def test_write_run_format(tmp_path):
    p = tmp_path / "run"
    write_run([RunEntry("q1", "d1", 1, 0.9, "ore")], p)
    assert p.read_text() == "q1 Q0 d1 1 0.9 ore\n"


def test_write_run_rank_gap(tmp_path):
    entries = [RunEntry("q1", "d1", 1, 0.9, "t"), RunEntry("q1", "d2", 3, 0.5, "t")]
    with pytest.raises(ValidationError):
        write_run(entries, tmp_path / "run")


def test_validate_run_score_inversion_and_ties():
    with pytest.raises(ValidationError):
        validate_run([RunEntry("q", "a", 1, 0.1, "t"), RunEntry("q", "b", 2, 0.5, "t")])
    with pytest.raises(ValidationError):
        validate_run([RunEntry("q", "b", 1, 0.5, "t"), RunEntry("q", "a", 2, 0.5, "t")])
    validate_run([RunEntry("q", "a", 1, 0.5, "t"), RunEntry("q", "b", 2, 0.5, "t")])


@st.composite
def runs(draw):
    entries = []
    for qi in range(draw(st.integers(1, 4))):
        n = draw(st.integers(1, 30))
        scores = sorted(draw(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=n, max_size=n)), reverse=True)
        ids = [f"d{i:03d}" for i in range(n)]  # ascending ids keep ties valid
        entries += [RunEntry(f"q{qi}", d, r, s, "tag") for r, (d, s) in enumerate(zip(ids, scores), start=1)]
    return entries


@settings(max_examples=40, deadline=None)
@given(runs())
def test_run_round_trip(tmp_path_factory, entries):
    p = tmp_path_factory.mktemp("runs") / "run"
    write_run(entries, p)
    assert load_run(p) == entries


def test_run_by_query_orders_by_rank():
    entries = [RunEntry("q", "b", 2, 0.1, "t"), RunEntry("q", "a", 1, 0.2, "t")]
    assert run_by_query(entries) == {"q": ["a", "b"]}


def test_load_embeddings_basic(tmp_path):
    t = load_embeddings(write(tmp_path / "e.tsv", "dim=2\nd1\t1.0 0.0\n"))
    assert t.dim == 2
    assert t.doc_vector("d1").tolist() == [1.0, 0.0]


def test_load_embeddings_wrong_width_names_row(tmp_path):
    with pytest.raises(ValidationError, match="d1"):
        load_embeddings(write(tmp_path / "e.tsv", "dim=2\nd1\t1.0 0.0 2.0\n"))


def test_load_embeddings_nan(tmp_path):
    with pytest.raises(ValidationError):
        load_embeddings(write(tmp_path / "e.tsv", "dim=2\nd1\tnan 0.0\n"))


def test_embeddings_round_trip(tmp_path):
    t = table({"d1": [0.1, 0.2], "d2": [1 / 3, -2.5]}, {"q1": [math.pi, 0.0]})
    write_embeddings(t, tmp_path / "d.tsv", tmp_path / "q.tsv")
    back = load_embeddings(tmp_path / "d.tsv", tmp_path / "q.tsv")
    assert back.doc_ids == t.doc_ids and back.query_ids == t.query_ids
    assert np.array_equal(back.doc_vectors, t.doc_vectors)
    assert np.array_equal(back.query_vectors, t.query_vectors)


def test_corpus_and_qrels_round_trip(tmp_path):
    docs = [Document("d2", "x y"), Document("d1", "z é")]
    write_corpus(docs, tmp_path / "c.jsonl")
    assert load_corpus(tmp_path / "c.jsonl") == docs
    q = Qrels({("q1", "d1"): 1, ("q2", "d3"): 3})
    write_qrels(q, tmp_path / "qrels")
    assert dict(load_qrels(tmp_path / "qrels").grades) == dict(q.grades)


def test_loaded_structures_are_read_only(tmp_path):
    t = load_embeddings(write(tmp_path / "e.tsv", "dim=1\nd1\t1.0\n"))
    with pytest.raises(ValueError):
        t.doc_vectors[0, 0] = 5.0
    q = Qrels({("q", "d"): 1})
    with pytest.raises(TypeError):
        q.grades[("q", "e")] = 2


def test_load_config_sections(tmp_path):
    cfg = load_config(write(tmp_path / "c.ini", "[bm25]\nk1 = 1.2\n"))
    assert cfg == {"bm25": {"k1": "1.2"}}
