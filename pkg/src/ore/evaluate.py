"""Recall/nDCG, per-system reports and cross-system comparison tables."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError
from .io import PathLike, Qrels, RunEntry, run_by_query

Run = Mapping[str, Sequence[str]]


def _as_run(run: Run | Iterable[RunEntry]) -> Run:
    if isinstance(run, Mapping):
        return run
    return run_by_query(run)


def recall_per_query(run, qrels: Qrels, k: int, min_grade: int = 1) -> dict[str, float]:
    """Recall@k for every judged query with at least one relevant document."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    run = _as_run(run)
    out = {}
    for qid in qrels.query_ids():
        rel = qrels.relevant(qid, min_grade)
        if not rel:
            continue
        top = run.get(qid, ())[:k]
        out[qid] = sum(1 for d in top if d in rel) / len(rel)
    return out


def recall_at_k(run, qrels: Qrels, k: int, min_grade: int = 1) -> float:
    per = recall_per_query(run, qrels, k, min_grade)
    return math.fsum(per.values()) / len(per) if per else 0.0


def _dcg(gains: Sequence[int]) -> float:
    return sum((2 ** g - 1) / math.log2(i + 2) for i, g in enumerate(gains))


def ndcg_per_query(run, qrels: Qrels, k: int) -> dict[str, float]:
    if k < 1:
        raise ValidationError("k must be >= 1")
    run = _as_run(run)
    out = {}
    for qid in qrels.query_ids():
        judged = qrels.judged(qid)
        ideal = _dcg(sorted(judged.values(), reverse=True)[:k])
        if ideal <= 0:
            continue
        out[qid] = _dcg([judged.get(d, 0) for d in run.get(qid, ())[:k]]) / ideal
    return out


def ndcg_at_k(run, qrels: Qrels, k: int) -> float:
    per = ndcg_per_query(run, qrels, k)
    return math.fsum(per.values()) / len(per) if per else 0.0


@dataclass
class MetricsReport:
    system: str
    per_query: dict[str, dict[str, float]]
    calls_used: float = 0.0  # mean per query
    latency_ms: float = 0.0  # mean simulated latency per query
    error_series: list[float] = field(default_factory=list)

    @property
    def metrics(self) -> list[str]:
        names: set[str] = set()
        for row in self.per_query.values():
            names.update(row)
        return sorted(names, key=lambda m: (m.split("@")[0], int(m.split("@")[1]) if "@" in m else 0))

    def mean(self, metric: str) -> float:
        vals = [row[metric] for row in self.per_query.values() if metric in row]
        return math.fsum(vals) / len(vals) if vals else 0.0


def make_report(system: str, run, qrels: Qrels, ks: Sequence[int] = (10, 50, 100), min_grade: int = 1,
                calls_used: float = 0.0, latency_ms: float = 0.0,
                error_series: Sequence[float] = ()) -> MetricsReport:
    per: dict[str, dict[str, float]] = {}
    for k in ks:
        for qid, v in recall_per_query(run, qrels, k, min_grade).items():
            per.setdefault(qid, {})[f"recall@{k}"] = v
        for qid, v in ndcg_per_query(run, qrels, k).items():
            per.setdefault(qid, {})[f"ndcg@{k}"] = v
    return MetricsReport(system, per, calls_used, latency_ms, list(error_series))


def sign_test(wins: int, losses: int) -> float:
    """Two-sided exact sign-test p-value; ties are dropped by the caller."""
    n = wins + losses
    if n == 0:
        return 1.0
    tail = sum(math.comb(n, i) for i in range(0, min(wins, losses) + 1)) / 2 ** n
    return min(1.0, 2 * tail)


@dataclass
class ComparisonRow:
    metric: str
    system: str
    mean: float
    baseline: str
    delta: float
    gain_pct: float
    wins: int
    losses: int
    ties: int
    p_value: float


def compare_systems(reports: Sequence[MetricsReport]) -> list[ComparisonRow]:
    """Compare every report against the first one, per metric, with per-query sign tests."""
    if len(reports) < 2:
        raise ValidationError("need at least two reports to compare")
    ref = reports[0]
    qset = set(ref.per_query)
    for r in reports[1:]:
        if set(r.per_query) != qset:
            raise ValidationError(f"report {r.system!r} covers a different query set than {ref.system!r}")
    rows = []
    for metric in ref.metrics:
        base = ref.mean(metric)
        for r in reports:
            mean = r.mean(metric)
            wins = losses = ties = 0
            for qid in sorted(qset):
                a, b = r.per_query[qid].get(metric, 0.0), ref.per_query[qid].get(metric, 0.0)
                if a > b:
                    wins += 1
                elif a < b:
                    losses += 1
                else:
                    ties += 1
            gain = (mean - base) / base * 100.0 if base else 0.0
            rows.append(ComparisonRow(metric, r.system, mean, ref.system, mean - base, gain, wins, losses, ties,
                                      sign_test(wins, losses)))
    return rows


def write_comparison(rows: Sequence[ComparisonRow], path: PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "system", "mean", "baseline", "delta", "gain_pct", "wins", "losses", "ties", "p_value"])
        for r in rows:
            w.writerow([r.metric, r.system, f"{r.mean:.6f}", r.baseline, f"{r.delta:.6f}", f"{r.gain_pct:.3f}",
                        r.wins, r.losses, r.ties, f"{r.p_value:.6g}"])


def write_metrics(report: MetricsReport, path: PathLike) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        metrics = report.metrics
        w.writerow(["system", "query_id", *metrics])
        for qid in sorted(report.per_query):
            w.writerow([report.system, qid, *(f"{report.per_query[qid].get(m, 0.0):.6f}" for m in metrics)])
        w.writerow([report.system, "all", *(f"{report.mean(m):.6f}" for m in metrics)])
        w.writerow([report.system, "calls_used", f"{report.calls_used:.3f}"])
        w.writerow([report.system, "latency_ms", f"{report.latency_ms:.3f}"])
