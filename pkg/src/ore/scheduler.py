"""The ORE control loop.

Each query owns a candidate pool, a budget ledger, an estimator and a
feature normalizer. Every round the loop

1. takes ``S``, the top-``s`` documents scored so far,
2. computes features for the unscored candidates (shortlists ``U``/``V`` in
   the adaptive setup, the whole merged pool in the hybrid one),
3. scores the ``b`` candidates with the highest ``EstRel = alpha . x``,
4. folds the observed ``phi + psi`` scores into the estimator, and
5. (adaptive only) adds the affinity-graph neighbours of the batch to the pool,

until ``min(c, cb * b)`` documents have been scored. The final list puts
scored documents first, by stored score, and fills any remaining slots with
unscored pool documents by EstRel.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import estimator as est_mod
from .collection import Collection
from .config import Settings
from .errors import BudgetError
from .features import ADAPTIVE, DIMS, HYBRID, Normalizer, adaptive_raw, hybrid_raw
from .lexical import rm3_expand, score_weighted
from .rankers import BudgetLedger, Ranker, score_batch

INITIAL = "initial"
NEIGHBOR = "neighbor"


@dataclass
class BatchDiagnostic:
    batch: int
    calls_used: int
    alpha: tuple[float, ...]
    error: float  # mean |EstRel - observed| on this batch, predicted before observing it
    pool_size: int
    doc_ids: tuple[str, ...] = ()


@dataclass
class RunResult:
    query_id: str
    system: str
    ranked: list[tuple[str, float]]
    scored: dict[str, float]
    ledger: BudgetLedger
    diagnostics: list[BatchDiagnostic] = field(default_factory=list)
    pool_sizes: list[int] = field(default_factory=list)
    estimator: est_mod.EstimatorState | None = None
    fill_docs: list[str] = field(default_factory=list)
    fill_features: np.ndarray | None = None
    features: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def calls_used(self) -> int:
        return self.ledger.calls_used

    def batch_of(self, doc_id: str) -> int | None:
        """1-based batch index in which ``doc_id`` was scored."""
        for diag in self.diagnostics:
            if doc_id in diag.doc_ids:
                return diag.batch
        return None


@dataclass
class Shortlists:
    U: list[int]
    V: list[int]

    def union(self) -> np.ndarray:
        return np.array(sorted(set(self.U) | set(self.V)), dtype=np.int64)


def derive_seed(seed: int, query_id: str) -> int:
    digest = hashlib.blake2b(f"{seed}\x1f{query_id}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _top(positions: np.ndarray, values: np.ndarray, k: int) -> np.ndarray:
    """Positions with the ``k`` largest values; ties by ascending position (= doc_id)."""
    if len(positions) == 0 or k <= 0:
        return positions[:0]
    order = np.lexsort((positions, -values))
    return positions[order[:k]]


def select_batch(candidates: Sequence[str], est_rel: Sequence[float], b: int,
                 scored: set[str] | frozenset[str] = frozenset()) -> list[str]:
    """Top ``b`` unscored candidates by EstRel, ties by ascending doc_id."""
    seen: dict[str, float] = {}
    for d, v in zip(candidates, est_rel):
        if d not in scored and d not in seen:
            seen[d] = float(v)
    return [d for d, _ in sorted(seen.items(), key=lambda kv: (-kv[1], kv[0]))[:b]]


def finalize(scored: dict[str, float], fill: Sequence[tuple[str, float]], c: int) -> list[tuple[str, float]]:
    """Scored documents by stored score, then ``fill`` (already ordered) up to ``c``.

    Fill entries carry a strictly decreasing score below the last scored one so
    the list is a valid run; their order is the order of ``fill``.
    """
    head = sorted(scored.items(), key=lambda kv: (-kv[1], kv[0]))[:c]
    out = list(head)
    floor = head[-1][1] if head else 0.0
    for i, (d, _) in enumerate(f for f in fill if f[0] not in scored):
        if len(out) >= c:
            break
        out.append((d, floor - (i + 1)))
    return out


class _Loop:
    """State shared by the hybrid and adaptive loops for one query."""

    def __init__(self, coll: Collection, query_id: str, ranker: Ranker, ledger: BudgetLedger,
                 settings: Settings, seed: int, setup: str) -> None:
        self.coll = coll
        self.qid = query_id
        self.ranker = ranker
        self.ledger = ledger
        self.settings = settings
        self.setup = setup
        self.dim = DIMS[setup]
        self.est = est_mod.init(self.dim, settings.lam, derive_seed(seed, query_id))
        self.norm = Normalizer(self.dim)
        self.n = coll.n_docs
        self.ids = coll.index.doc_ids
        self.bm25 = coll.bm25(query_id)
        self.in_pool = np.zeros(self.n, dtype=bool)
        self.provenance: dict[int, str] = {}
        self.scored: dict[int, float] = {}
        self.diagnostics: list[BatchDiagnostic] = []
        self.pool_sizes: list[int] = []
        self.feature_log: dict[str, np.ndarray] = {}

    def add(self, positions, provenance: str) -> None:
        for p in positions:
            p = int(p)
            if not self.in_pool[p]:
                self.in_pool[p] = True
                self.provenance[p] = provenance

    def unscored(self) -> np.ndarray:
        mask = self.in_pool.copy()
        if self.scored:
            mask[list(self.scored)] = False
        return np.flatnonzero(mask)

    def top_set(self) -> list[tuple[int, float]]:
        items = sorted(self.scored.items(), key=lambda kv: (-kv[1], kv[0]))
        return items[: self.settings.s]

    def features(self, cands: np.ndarray, update: bool = True) -> np.ndarray:
        raw, mask = self.raw(cands)
        if update:
            self.norm.update(raw, mask)
        return self.norm.transform(raw, mask)

    def raw(self, cands: np.ndarray):  # pragma: no cover - overridden
        raise NotImplementedError

    def cold_start_order(self, cands: np.ndarray, X: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def candidates(self, unscored: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def after_batch(self, batch: np.ndarray) -> None:
        pass

    def run(self) -> RunResult:
        batch_no = 0
        while self.ledger.remaining > 0:
            unscored = self.unscored()
            if len(unscored) == 0:
                break
            self.prepare()
            cands = self.candidates(unscored)
            if len(cands) == 0:
                break
            X = self.features(cands)
            est = X @ self.est.alpha
            n = self.ledger.next_batch_size()
            if batch_no == 0 and not self.settings.random_alpha_first_batch:
                pick = self.cold_start_order(cands, X)[:n]
            else:
                pick = np.lexsort((cands, -est))[:n]
            batch = cands[pick]
            docs = [self.ids[p] for p in batch]
            calls = score_batch(self.ranker, self.qid, docs, self.ledger, features=X[pick])
            y = np.array([c.score for c in calls]) + self.coll.psi_scores(self.qid, docs)
            self.est.observe(X[pick], y)
            for p, v, x in zip(batch, y, X[pick]):
                self.scored[int(p)] = float(v)
                self.feature_log[self.ids[p]] = x
            batch_no += 1
            self.diagnostics.append(BatchDiagnostic(
                batch_no, self.ledger.calls_used, tuple(float(a) for a in self.est.alpha),
                float(np.mean(np.abs(est[pick] - y))), int(self.in_pool.sum()), tuple(docs)))
            self.after_batch(batch)
            self.pool_sizes.append(int(self.in_pool.sum()))
        if self.ledger.calls_used > self.ledger.cap:
            raise BudgetError("scheduler exceeded its budget")
        return self.finish()

    def prepare(self) -> None:
        pass

    def finish(self) -> RunResult:
        self.prepare()
        rest = self.unscored()
        X = self.features(rest) if len(rest) else np.zeros((0, self.dim))
        est = X @ self.est.alpha
        order = np.lexsort((rest, -est)) if len(rest) else np.zeros(0, dtype=np.int64)
        fill = [(self.ids[rest[i]], float(est[i])) for i in order]
        scored = {self.ids[p]: v for p, v in self.scored.items()}
        ranked = finalize(scored, fill, self.ledger.c)
        return RunResult(self.qid, f"ore-{self.setup}", ranked, scored, self.ledger, self.diagnostics,
                         self.pool_sizes, self.est, [self.ids[p] for p in rest], X, self.feature_log)


class _Adaptive(_Loop):
    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, setup=ADAPTIVE, **kwargs)
        depth = self.settings.adaptive_depth or self.ledger.c
        r0 = self.coll.bm25_run(self.qid, depth)
        pos = self.coll.index.doc_pos
        self.add([pos[d] for d, _ in r0], INITIAL)
        self.csr = self.coll.graph_csr
        self.u, self.v = self.settings.shortlist_sizes(self.ledger.b)
        self.s_score = np.full(self.n, np.nan)
        self.shortlists = Shortlists([], [])

    def prepare(self) -> None:
        self.s_score[:] = np.nan
        for p, v in self.top_set():
            self.s_score[p] = v

    def raw(self, cands):
        return adaptive_raw(cands, self.bm25, self.csr, self.s_score)

    def candidates(self, unscored):
        U = _top(unscored, self.bm25[unscored], self.u)
        raw, mask = self.raw(unscored)
        linked = unscored[mask[:, 1]]
        V = _top(linked, raw[mask[:, 1], 1], self.v)
        self.shortlists = Shortlists([int(p) for p in U], [int(p) for p in V])
        return self.shortlists.union()

    def cold_start_order(self, cands, X):
        return np.lexsort((cands, -self.bm25[cands]))

    def after_batch(self, batch):
        indptr, nbr, _ = self.csr
        for p in batch:
            self.add(nbr[indptr[p]:indptr[p + 1]], NEIGHBOR)


class _Hybrid(_Loop):
    def __init__(self, *args, **kwargs) -> None:
        super().__init__(*args, setup=HYBRID, **kwargs)
        depth = self.settings.hybrid_depth
        pos = self.coll.index.doc_pos
        self.add([pos[d] for d, _ in self.coll.bm25_run(self.qid, depth)], INITIAL)
        self.add([pos[d] for d, _ in self.coll.dense_run(self.qid, depth)], INITIAL)
        self.tokens = self.coll.tokens(self.qid)
        dense = self.coll.dense
        self.use_dense = self.coll.has_dense_query(self.qid)
        self.dense_q = dense.query_scores(self.qid) if self.use_dense else np.zeros(1)
        self.rows = self.coll.dense_rows if self.use_dense else np.full(self.n, -1, dtype=np.int64)
        self.rm3: np.ndarray | None = None
        self.set_rows = np.zeros(0, dtype=np.int64)
        self.set_scores = np.zeros(0)

    def prepare(self) -> None:
        top = self.top_set()
        members = [(p, v) for p, v in top if self.rows[p] >= 0]
        self.set_rows = np.array([self.rows[p] for p, _ in members], dtype=np.int64)
        self.set_scores = np.array([v for _, v in members])
        if self.scored:
            fb = [self.ids[p] for p, _ in top[: self.settings.fb_docs]]
            expanded = rm3_expand(self.coll.index, self.tokens, fb, self.settings.fb_terms, self.settings.orig_weight)
            self.rm3 = score_weighted(self.coll.index, expanded.weights)
        else:
            self.rm3 = None

    def raw(self, cands):
        return hybrid_raw(cands, self.bm25, self.dense_q, self.rows, self.rm3,
                          self.coll.dense if self.use_dense else None, self.set_rows, self.set_scores)

    def candidates(self, unscored):
        return unscored

    def cold_start_order(self, cands, X):
        return np.lexsort((cands, -(X[:, 0] + X[:, 1])))


def run_adaptive(coll: Collection, query_id: str, ranker: Ranker, ledger: BudgetLedger,
                 settings: Settings | None = None, seed: int = 0) -> RunResult:
    """Adaptive ORE: BM25 first stage, pool grows with affinity-graph neighbours."""
    return _Adaptive(coll, query_id, ranker, ledger, settings or Settings(), seed).run()


def run_hybrid(coll: Collection, query_id: str, ranker: Ranker, ledger: BudgetLedger,
               settings: Settings | None = None, seed: int = 0) -> RunResult:
    """Hybrid ORE over the union of the BM25 and dense first-stage lists."""
    return _Hybrid(coll, query_id, ranker, ledger, settings or Settings(), seed).run()


def holdout_error(result: RunResult, ranker: Ranker, coll: Collection) -> float:
    """Mean |EstRel - true score| over the unscored pool, using the final estimator.

    Calls the ranker outside the budget; meant for diagnostics with oracle rankers.
    """
    if result.estimator is None or not result.fill_docs:
        return float("nan")
    X = result.fill_features
    y = np.asarray(ranker.score(result.query_id, result.fill_docs, X), dtype=np.float64)
    y = y + coll.psi_scores(result.query_id, result.fill_docs)
    return float(np.mean(np.abs(X @ result.estimator.alpha - y)))
