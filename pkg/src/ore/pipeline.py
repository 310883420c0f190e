"""Run any system over a query set and serialise the results."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

from . import baselines
from .collection import Collection
from .config import Settings
from .errors import ValidationError
from .io import RunEntry, ranked_to_entries
from .rankers import BudgetLedger, Ranker
from .scheduler import RunResult, run_adaptive, run_hybrid

SYSTEMS = ("ore-hybrid", "ore-adaptive", "rrf", "cc", "rerank", "gar", "quam", "exhaustive")
BUDGETED = SYSTEMS[:-1]


def run_query(system: str, coll: Collection, query_id: str, ranker: Ranker, ledger: BudgetLedger,
              settings: Settings, seed: int = 0, override_cap: bool = False) -> RunResult:
    if system == "ore-adaptive":
        return run_adaptive(coll, query_id, ranker, ledger, settings, seed)
    if system == "ore-hybrid":
        return run_hybrid(coll, query_id, ranker, ledger, settings, seed)
    if system in ("rrf", "cc"):
        fused = baselines.fused_first_stage(coll, query_id, settings, system)
        return baselines.plain_rerank(coll, query_id, fused, ranker, ledger, system)
    depth = settings.adaptive_depth or ledger.c
    if system == "rerank":
        return baselines.plain_rerank(coll, query_id, coll.bm25_run(query_id, depth), ranker, ledger)
    if system == "gar":
        return baselines.gar_style(coll, query_id, coll.bm25_run(query_id, depth), ranker, ledger)
    if system == "quam":
        return baselines.quam_style(coll, query_id, coll.bm25_run(query_id, depth), ranker, ledger, settings.s)
    if system == "exhaustive":
        return baselines.exhaustive(coll, query_id, ranker, ledger.c, settings.exhaustive_cap, override_cap)
    raise ValidationError(f"unknown system {system!r}; expected one of {', '.join(SYSTEMS)}")


def run_system(system: str, coll: Collection, query_ids: Sequence[str], ranker: Ranker, c: int, b: int,
               cb: int | None = None, settings: Settings | None = None, seed: int = 0, jobs: int = 1,
               override_cap: bool = False) -> list[RunResult]:
    """Run ``system`` for every query; results come back in ``query_ids`` order."""
    settings = settings or Settings()
    if system not in SYSTEMS:
        raise ValidationError(f"unknown system {system!r}; expected one of {', '.join(SYSTEMS)}")

    def one(qid: str) -> RunResult:
        ledger = BudgetLedger(c, b, cb, settings.latency_ms)
        return run_query(system, coll, qid, ranker, ledger, settings, seed, override_cap)

    if jobs <= 0:
        jobs = os.cpu_count() or 1
    if jobs == 1 or len(query_ids) < 2:
        return [one(q) for q in query_ids]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, query_ids))


def to_entries(results: Sequence[RunResult], tag: str) -> list[RunEntry]:
    entries: list[RunEntry] = []
    for r in results:
        entries.extend(ranked_to_entries(r.query_id, r.ranked, tag))
    return entries


DIAG_HEADER = "query_id\tbatch\tcalls_used\talpha\terror\tpool_size"


def diagnostics_lines(results: Sequence[RunResult]) -> list[str]:
    """Per-batch TSV rows: batch index, calls used, alpha, EstRel error, pool size."""
    lines = [DIAG_HEADER]
    for r in results:
        for d in r.diagnostics:
            alpha = ",".join(repr(a) for a in d.alpha)
            lines.append(f"{r.query_id}\t{d.batch}\t{d.calls_used}\t{alpha}\t{d.error!r}\t{d.pool_size}")
        lines.append(f"{r.query_id}\tfinal\tcalls_used={r.calls_used}\t\t\t")
    return lines
