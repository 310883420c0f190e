"""Comparison systems: rank fusion, plain re-ranking, GAR- and QUAM-style adaptive re-ranking, exhaustive scoring.

GAR and QUAM are reconstructed from their observable behaviour: batches
alternate between the first-stage list and a frontier of graph neighbours of
already-scored documents, and unscored slots are backfilled from the
first-stage list. They differ only in how the neighbour frontier is ordered.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .collection import Collection
from .config import Settings
from .errors import RefusalError, ValidationError
from .rankers import BudgetLedger, Ranker, score_batch
from .scheduler import BatchDiagnostic, RunResult, finalize

RankedList = list[tuple[str, float]]


@dataclass(frozen=True)
class FusionConfig:
    rrf_k: int = 60
    cc_lambda: float = 0.5
    normalization: str = "min-max"

    def __post_init__(self) -> None:
        if self.rrf_k < 1:
            raise ValidationError("rrf_k must be >= 1")
        if not 0.0 <= self.cc_lambda <= 1.0:
            raise ValidationError("cc_lambda must be in [0, 1]")
        if self.normalization != "min-max":
            raise ValidationError(f"unsupported normalization {self.normalization!r}")


def _sorted(scores: dict[str, float]) -> RankedList:
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


def rrf(lists: Sequence[RankedList], k: int = 60) -> RankedList:
    """Reciprocal rank fusion: ``sum 1 / (k + rank)`` over the lists containing a doc."""
    if k < 1:
        raise ValidationError("rrf k must be >= 1")
    fused: dict[str, float] = {}
    for ranked in lists:
        for rank, (d, _) in enumerate(ranked, start=1):
            fused[d] = fused.get(d, 0.0) + 1.0 / (k + rank)
    return _sorted(fused)


def _minmax(ranked: RankedList) -> dict[str, float]:
    if not ranked:
        return {}
    vals = [s for _, s in ranked]
    lo, hi = min(vals), max(vals)
    if hi == lo:
        return {d: 0.0 for d, _ in ranked}
    return {d: (s - lo) / (hi - lo) for d, s in ranked}


def cc_fuse(list_a: RankedList, list_b: RankedList, lam: float = 0.5) -> RankedList:
    """Convex combination of per-list min-max normalised scores; absent docs count as 0."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must be in [0, 1], got {lam}")
    na, nb = _minmax(list_a), _minmax(list_b)
    return _sorted({d: lam * na.get(d, 0.0) + (1.0 - lam) * nb.get(d, 0.0) for d in set(na) | set(nb)})


# ---------------------------------------------------------------------------
# budgeted re-rankers


class _Scorer:
    def __init__(self, coll: Collection, query_id: str, ranker: Ranker, ledger: BudgetLedger) -> None:
        self.coll = coll
        self.qid = query_id
        self.ranker = ranker
        self.ledger = ledger
        self.scored: dict[str, float] = {}
        self.diagnostics: list[BatchDiagnostic] = []

    def score(self, docs: list[str]) -> None:
        calls = score_batch(self.ranker, self.qid, docs, self.ledger)
        y = np.array([c.score for c in calls]) + self.coll.psi_scores(self.qid, docs)
        for d, v in zip(docs, y):
            self.scored[d] = float(v)
        self.diagnostics.append(BatchDiagnostic(len(self.diagnostics) + 1, self.ledger.calls_used, (),
                                                float("nan"), len(self.scored), tuple(docs)))

    def result(self, system: str, backfill: RankedList) -> RunResult:
        ranked = finalize(self.scored, backfill, self.ledger.c)
        return RunResult(self.qid, system, ranked, dict(self.scored), self.ledger, self.diagnostics)


def plain_rerank(coll: Collection, query_id: str, first_stage: RankedList, ranker: Ranker,
                 ledger: BudgetLedger, system: str = "rerank") -> RunResult:
    """Score the head of ``first_stage`` in batches; backfill the rest of the top ``c`` in list order."""
    sc = _Scorer(coll, query_id, ranker, ledger)
    head = [d for d, _ in first_stage[: ledger.c]]
    i = 0
    while ledger.remaining > 0 and i < len(head):
        n = ledger.next_batch_size()
        sc.score(head[i:i + n])
        i += n
    return sc.result(system, first_stage)


def _alternating(coll: Collection, query_id: str, first_stage: RankedList, ranker: Ranker, ledger: BudgetLedger,
                 system: str, s: int) -> RunResult:
    sc = _Scorer(coll, query_id, ranker, ledger)
    graph = coll.graph
    initial = [d for d, _ in first_stage[: ledger.c]]
    cursor = 0
    # best (source score, edge weight) seen for each frontier document
    frontier: dict[str, tuple[float, float]] = {}

    def from_initial(n: int) -> list[str]:
        nonlocal cursor
        out = []
        while len(out) < n and cursor < len(initial):
            d = initial[cursor]
            cursor += 1
            if d not in sc.scored:
                out.append(d)
        return out

    def from_frontier(n: int, exclude: set[str]) -> list[str]:
        live = [d for d in frontier if d not in sc.scored and d not in exclude]
        if system == "quam":
            top = dict(sorted(sc.scored.items(), key=lambda kv: (-kv[1], kv[0]))[:s])

            def key(d):
                hit = [w for nb, w in graph.adjacency.get(d, ()) if nb in top]
                aff = sum(hit) / len(hit) if hit else 0.0
                return (-aff, -frontier[d][0], -frontier[d][1], d)
        else:
            def key(d):
                return (-frontier[d][0], -frontier[d][1], d)
        return sorted(live, key=key)[:n]

    batch_no = 0
    while ledger.remaining > 0:
        n = ledger.next_batch_size()
        batch_no += 1
        if batch_no % 2 == 1:
            docs = from_initial(n)
            docs += from_frontier(n - len(docs), set(docs))
        else:
            docs = from_frontier(n, set())
            docs += from_initial(n - len(docs))
        if not docs:
            break
        sc.score(docs)
        for d in docs:
            src = sc.scored[d]
            for nb, w in graph.adjacency.get(d, ()):
                if nb in sc.scored:
                    continue
                cand = (src, w)
                if nb not in frontier or cand > frontier[nb]:
                    frontier[nb] = cand
    return sc.result(system, first_stage)


def gar_style(coll: Collection, query_id: str, first_stage: RankedList, ranker: Ranker,
              ledger: BudgetLedger) -> RunResult:
    """Alternate first-stage and neighbour batches; neighbours ordered by (source score, edge weight)."""
    return _alternating(coll, query_id, first_stage, ranker, ledger, "gar", 0)


def quam_style(coll: Collection, query_id: str, first_stage: RankedList, ranker: Ranker, ledger: BudgetLedger,
               s: int = 10) -> RunResult:
    """As :func:`gar_style`, but neighbours are ordered by mean edge weight to the top-``s`` scored set."""
    return _alternating(coll, query_id, first_stage, ranker, ledger, "quam", s)


def exhaustive(coll: Collection, query_id: str, ranker: Ranker, c: int, cap: int = 100_000,
               override: bool = False) -> RunResult:
    """Score every indexed document; the recall ceiling for a ranker."""
    n = coll.n_docs
    if n > cap and not override:
        raise RefusalError(f"exhaustive scoring of {n} documents exceeds the cap of {cap}; pass override")
    ledger = BudgetLedger(max(n, 1), max(n, 1))
    sc = _Scorer(coll, query_id, ranker, ledger)
    sc.score(list(coll.index.doc_ids))
    ranked = finalize(sc.scored, [], min(c, n))
    return RunResult(query_id, "exhaustive", ranked, dict(sc.scored), ledger, sc.diagnostics)


def fused_first_stage(coll: Collection, query_id: str, settings: Settings, method: str) -> RankedList:
    bm25 = coll.bm25_run(query_id, settings.hybrid_depth)
    dense = coll.dense_run(query_id, settings.hybrid_depth)
    if method == "rrf":
        return rrf([bm25, dense], settings.rrf_k)
    return cc_fuse(bm25, dense, settings.cc_lambda)
