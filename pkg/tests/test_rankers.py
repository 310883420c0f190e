import numpy as np
import pytest

from ore.errors import BudgetError, ParseError, UnknownIdError, ValidationError
from ore.io import Qrels, RunEntry, load_run, write_run
from ore.rankers import (BudgetLedger, cached_ranker, graded_oracle, latent_linear_oracle, pair_noise,
                         score_batch)


def test_ledger_charges_batch():
    ledger = BudgetLedger(100, 16)
    score_batch(graded_oracle(Qrels({})), "q", [f"d{i}" for i in range(16)], ledger)
    assert ledger.calls_used == 16
    assert ledger.remaining == 84


def test_ledger_refuses_overdraw():
    ledger = BudgetLedger(20, 16)
    score_batch(graded_oracle(Qrels({})), "q", [f"d{i}" for i in range(16)], ledger)
    with pytest.raises(BudgetError):
        score_batch(graded_oracle(Qrels({})), "q", [f"e{i}" for i in range(5)], ledger)


def test_ledger_refuses_oversize_batch():
    with pytest.raises(BudgetError):
        score_batch(graded_oracle(Qrels({})), "q", [f"d{i}" for i in range(17)], BudgetLedger(100, 16))


@pytest.mark.parametrize("c,b,cb", [(100, 16, 8), (100, 16, 0), (10, 16, None), (100, 0, 1)])
def test_ledger_rejects_bad_budgets(c, b, cb):
    with pytest.raises(ValidationError):
        BudgetLedger(c, b, cb)


def test_ledger_batch_sizes_and_cap():
    ledger = BudgetLedger(100, 16, 7)
    sizes = []
    while ledger.remaining:
        n = ledger.next_batch_size()
        sizes.append(n)
        ledger.calls_used += n
    assert sizes == [16, 16, 16, 16, 16, 16, 4]
    assert BudgetLedger(100, 16, 3).cap == 48


def test_latency_accounting():
    ledger = BudgetLedger(100, 16, per_call_latency_ms=2.5)
    ledger.calls_used = 34
    assert ledger.simulated_latency_ms == 85.0
    assert ledger.batched_latency_ms() == 3 * 16 * 2.5
    assert ledger.batched_latency_ms(10.0) == 30.0


def test_graded_oracle_noiseless():
    q = Qrels({("q", "a"): 3, ("q", "b"): 1})
    o = graded_oracle(q)
    assert o.score("q", ["a", "b", "c"]).tolist() == [3.0, 1.0, 0.0]


def test_graded_oracle_orders_by_grade():
    q = Qrels({("q", "c"): 2, ("q", "a"): 2, ("q", "b"): 3})
    o = graded_oracle(q)
    ids = ["a", "b", "c", "d"]
    scores = dict(zip(ids, o.score("q", ids)))
    assert sorted(ids, key=lambda d: (-scores[d], d)) == ["b", "a", "c", "d"]


def test_graded_oracle_deterministic_and_order_free():
    q = Qrels({("q", "a"): 1})
    o = graded_oracle(q, 0.5, seed=4)
    ab = o.score("q", ["a", "b"])
    ba = o.score("q", ["b", "a"])
    assert ab.tolist() == ba[::-1].tolist()
    assert o.score("q", ["a", "b"]).tolist() == ab.tolist()


def test_graded_oracle_monte_carlo_mean():
    sigma = 0.5
    q = Qrels({("q", "d"): 2})
    draws = [graded_oracle(q, sigma, seed).score("q", ["d"])[0] for seed in range(10_000)]
    assert abs(np.mean(draws) - 2.0) <= 3 * sigma / 100
    assert np.std(draws) == pytest.approx(sigma, rel=0.05)


def test_pair_noise_is_standard_normal_ish():
    z = np.array([pair_noise(0, "q", f"d{i}") for i in range(20_000)])
    assert abs(z.mean()) < 0.03
    assert abs(z.std() - 1.0) < 0.03


def test_negative_sigma_rejected():
    with pytest.raises(ValidationError):
        graded_oracle(Qrels({}), -1.0)


def test_latent_projection():
    feats = {"a": [0.3, 9.0], "b": [0.7, -1.0]}
    o = latent_linear_oracle(lambda q, d: feats[d], [1.0, 0.0])
    assert o.score("q", ["a", "b"]).tolist() == [0.3, 0.7]


def test_latent_uses_batch_features():
    o = latent_linear_oracle(None, [2.0, 1.0])
    assert o.score("q", ["a"], np.array([[1.0, 3.0]])).tolist() == [5.0]


def test_latent_dimension_mismatch():
    with pytest.raises(ValidationError):
        latent_linear_oracle(lambda q, d: [1, 2, 3, 4], [1, 1, 1], dim=4)
    o = latent_linear_oracle(lambda q, d: [1, 2, 3, 4], [1, 1, 1])
    with pytest.raises(ValidationError):
        o.score("q", ["a"])


def test_cached_ranker_lookup(tmp_path):
    p = tmp_path / "scores.tsv"
    p.write_text("q1\td1\t0.7\nq1\td2\t0.1\n")
    r = cached_ranker(p)
    assert r.score("q1", ["d1"]).tolist() == [0.7]
    with pytest.raises(UnknownIdError, match="d9"):
        r.score("q1", ["d9"])


def test_cached_ranker_bad_line(tmp_path):
    p = tmp_path / "scores.tsv"
    p.write_text("q1\td1\n")
    with pytest.raises(ParseError):
        cached_ranker(p)


def test_cached_ranker_replays_run_order(tmp_path):
    entries = [RunEntry("q1", f"d{i}", i + 1, 10.0 - i * 0.5, "x") for i in range(12)]
    write_run(entries, tmp_path / "run")
    loaded = load_run(tmp_path / "run")
    (tmp_path / "scores.tsv").write_text("".join(f"{e.query_id}\t{e.doc_id}\t{e.score!r}\n" for e in loaded))
    r = cached_ranker(tmp_path / "scores.tsv")
    ids = [e.doc_id for e in reversed(loaded)]
    scores = r.score("q1", ids)
    assert sorted(ids, key=lambda d: -scores[ids.index(d)]) == [e.doc_id for e in entries]


def test_non_finite_ranker_output_rejected():
    class Bad:
        def score(self, q, ids, features=None):
            return np.array([np.nan] * len(ids))

    with pytest.raises(ValidationError):
        score_batch(Bad(), "q", ["a"], BudgetLedger(10, 5))
