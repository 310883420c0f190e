"""Command line entry point: ``ore {build-index,build-graph,synth,run,eval,sweep}``.

Every failure prints one line ``error[E_CODE]: message`` to stderr and exits
with the code in :data:`EXIT_CODES`.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import os
import sys
import time
from typing import Sequence

import numpy as np

from . import __version__
from .collection import Collection
from .config import Settings, settings_from_file
from .dense import DenseScorer
from .errors import BudgetError, OreError, ParseError, RefusalError, UnknownIdError, ValidationError
from .evaluate import compare_systems, make_report, recall_at_k, write_comparison, write_metrics
from .graph import build_graph, load_graph, save_graph
from .io import load_corpus, load_embeddings, load_qrels, load_queries, load_run, run_by_query, write_run
from .lexical import build_index, load_index, save_index
from .pipeline import SYSTEMS, diagnostics_lines, run_system, to_entries
from .rankers import BudgetLedger, cached_ranker, graded_oracle, latent_linear_oracle
from .synth import FILES, SynthSpec, generate, write_synth

EXIT_CODES = {
    "E_USAGE": 2,
    "E_IO": 3,
    "E_PARSE": 3,
    "E_VALIDATION": 4,
    "E_LOOKUP": 4,
    "E_BUDGET": 5,
    "E_REFUSED": 6,
    "E_INTERNAL": 1,
}


class UsageError(OreError):
    code = "E_USAGE"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with its own format otherwise
        raise UsageError(message)


# ---------------------------------------------------------------------------
# shared argument groups


def _add_data_args(p: argparse.ArgumentParser, need_queries: bool = True) -> None:
    g = p.add_argument_group("data")
    g.add_argument("--data", help="directory written by `ore synth`; individual paths override it")
    g.add_argument("--corpus")
    g.add_argument("--index", help="prebuilt index from `ore build-index` (instead of --corpus)")
    if need_queries:
        g.add_argument("--queries")
    g.add_argument("--qrels")
    g.add_argument("--embeddings", help="document embeddings")
    g.add_argument("--query-embeddings")
    g.add_argument("--graph", help="affinity graph edge list")
    g.add_argument("--no-graph", action="store_true", help="ignore any graph (empty neighbourhoods)")
    g.add_argument("--psi", choices=("dense", "none"), default="dense",
                   help="cheap scorer added to ranker scores (default: the dense scorer)")


def _add_budget_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c", type=int, default=100, help="documents scored per query")
    p.add_argument("--b", type=int, default=16, help="batch size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ranker", default="graded:0", help="graded:SIGMA | latent[:SIGMA] | cached:PATH")
    p.add_argument("--latent-weights", help="comma separated weights for the latent ranker (default all ones)")
    p.add_argument("--config", help="settings file with [section] key = value entries")
    p.add_argument("--jobs", type=int, default=0, help="queries run in parallel (0 = all cores)")
    p.add_argument("--latency-ms", type=float, help="simulated latency per ranker call")
    p.add_argument("--random-alpha-first-batch", action="store_true",
                   help="pick the first batch with the random initial weights instead of first-stage order")
    p.add_argument("--override-cap", action="store_true", help="let `exhaustive` run above its corpus cap")


def _path(args, name: str, role: str | None = None) -> str | None:
    value = getattr(args, name, None)
    if value is None and getattr(args, "data", None) and role is not None:
        candidate = os.path.join(args.data, FILES[role])
        if os.path.exists(candidate):
            value = candidate
    if value is not None and not os.path.exists(value):
        raise FileNotFoundError(value)
    return value


def _settings(args) -> Settings:
    settings = settings_from_file(args.config) if getattr(args, "config", None) else Settings()
    return settings.replace(latency_ms=args.latency_ms,
                            random_alpha_first_batch=True if args.random_alpha_first_batch else None)


def _load(args, settings: Settings):
    index_path = _path(args, "index")
    if index_path:
        index = load_index(index_path)
    else:
        corpus = _path(args, "corpus", "corpus")
        if corpus is None:
            raise UsageError("one of --corpus, --index or --data is required")
        index = build_index(load_corpus(corpus), settings.k1, settings.b)
    queries_path = _path(args, "queries", "queries")
    if queries_path is None:
        raise UsageError("--queries (or --data) is required")
    queries = load_queries(queries_path)
    dense = None
    emb = _path(args, "embeddings", "doc_embeddings")
    if emb:
        dense = DenseScorer(load_embeddings(emb, _path(args, "query_embeddings", "query_embeddings")), settings.metric)
    graph = None
    graph_path = None if args.no_graph else _path(args, "graph", "graph")
    if graph_path:
        graph = load_graph(graph_path)
    qrels_path = _path(args, "qrels", "qrels")
    qrels = load_qrels(qrels_path) if qrels_path else None
    coll = Collection.create(index, queries, dense, "dense" if args.psi == "dense" else None, graph)
    return coll, [q.query_id for q in queries], qrels


def _ranker(spec: str, qrels, seed: int, latent_weights: str | None, settings: Settings):
    kind, _, arg = spec.partition(":")
    if kind == "graded":
        if qrels is None:
            raise UsageError("the graded ranker needs --qrels")
        return graded_oracle(qrels, float(arg) if arg else settings.sigma, seed)
    if kind == "latent":
        sigma = float(arg) if arg else settings.sigma
        w = [float(x) for x in latent_weights.split(",")] if latent_weights else None
        return _LatentDefault(w, sigma, seed)
    if kind == "cached":
        if not arg:
            raise UsageError("cached ranker needs a path: cached:PATH")
        if not os.path.exists(arg):
            raise FileNotFoundError(arg)
        return cached_ranker(arg)
    raise UsageError(f"unknown ranker {spec!r}; expected graded:SIGMA, latent[:SIGMA] or cached:PATH")


class _LatentDefault:
    """Latent ranker whose weight vector defaults to ones of the feature width."""

    def __init__(self, w, sigma: float, seed: int) -> None:
        self.w, self.sigma, self.seed = w, sigma, seed

    def score(self, query_id, doc_ids, features=None):
        if features is None:
            raise ValidationError("the latent ranker scores feature rows; use it with ore-hybrid or ore-adaptive")
        w = self.w if self.w is not None else np.ones(np.asarray(features).shape[1])
        return latent_linear_oracle(None, w, self.sigma, self.seed).score(query_id, doc_ids, features)


def _check_budget(c: int, b: int, cb: int | None) -> None:
    try:
        BudgetLedger(c, b, cb)
    except ValidationError as exc:
        raise UsageError(f"invalid budget: {exc}") from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_index(args) -> int:
    settings = settings_from_file(args.config) if args.config else Settings()
    settings = settings.replace(k1=args.k1, b=args.bm25_b)
    index = build_index(load_corpus(_path(args, "corpus")), settings.k1, settings.b)
    save_index(index, args.out)
    print(f"indexed {index.n_docs} documents, {len(index.vocab)} terms -> {args.out}")
    return 0


def cmd_build_graph(args) -> int:
    if args.source == "lexical":
        if args.index:
            index = load_index(_path(args, "index"))
        elif args.corpus:
            index = build_index(load_corpus(_path(args, "corpus")))
        else:
            raise UsageError("lexical graphs need --corpus or --index")
        graph = build_graph(index, index.doc_ids, args.k)
    else:
        if not args.embeddings:
            raise UsageError("semantic graphs need --embeddings")
        table = load_embeddings(_path(args, "embeddings"))
        graph = build_graph(DenseScorer(table, args.metric), table.doc_ids, args.k)
    save_graph(graph, args.out)
    print(f"{graph.n_edges()} edges over {len(graph.adjacency)} documents -> {args.out}")
    return 0


def cmd_synth(args) -> int:
    fields = {f.name for f in dataclasses.fields(SynthSpec)}
    spec = SynthSpec(**{k: v for k, v in vars(args).items() if k in fields and v is not None})
    paths = write_synth(generate(spec), args.out)
    for role, path in paths.items():
        print(f"{role}\t{path}")
    return 0


def _write_results(results, out: str, tag: str, qrels, c: int, dump_features: bool, dump_alpha: bool) -> None:
    os.makedirs(out, exist_ok=True)
    write_run(to_entries(results, tag), os.path.join(out, "run.txt"))
    with open(os.path.join(out, "diagnostics.tsv"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(diagnostics_lines(results)) + "\n")
    if qrels is not None:
        ks = sorted({10, 50, 100, c})
        run = {r.query_id: [d for d, _ in r.ranked] for r in results}
        report = make_report(tag, run, qrels, ks,
                             calls_used=float(np.mean([r.calls_used for r in results])) if results else 0.0,
                             latency_ms=float(np.mean([r.ledger.simulated_latency_ms for r in results]))
                             if results else 0.0)
        write_metrics(report, os.path.join(out, "metrics.csv"))
    if dump_features:
        with open(os.path.join(out, "features.tsv"), "w", encoding="utf-8") as fh:
            fh.write("query_id\tdoc_id\tbatch\tfeatures\n")
            for r in results:
                for doc, x in sorted(r.features.items(), key=lambda kv: (r.batch_of(kv[0]), kv[0])):
                    fh.write(f"{r.query_id}\t{doc}\t{r.batch_of(doc)}\t{','.join(repr(float(v)) for v in x)}\n")
    if dump_alpha:
        with open(os.path.join(out, "alpha.tsv"), "w", encoding="utf-8") as fh:
            fh.write("query_id\tbatch\talpha\n")
            for r in results:
                for d in r.diagnostics:
                    fh.write(f"{r.query_id}\t{d.batch}\t{','.join(repr(a) for a in d.alpha)}\n")


def cmd_run(args) -> int:
    _check_budget(args.c, args.b, args.cb)
    settings = _settings(args)
    coll, qids, qrels = _load(args, settings)
    ranker = _ranker(args.ranker, qrels, args.seed, args.latent_weights, settings)
    started = time.perf_counter()
    results = run_system(args.system, coll, qids, ranker, args.c, args.b, args.cb, settings, args.seed,
                         args.jobs, args.override_cap)
    wall = time.perf_counter() - started
    _write_results(results, args.out, args.tag or args.system, qrels, args.c, args.dump_features, args.dump_alpha)
    calls = sum(r.calls_used for r in results)
    print(f"{args.system}: {len(results)} queries, {calls} ranker calls, {wall:.2f}s wall -> {args.out}")
    return 0


def _parse_ints(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        lo, sep, hi = part.partition("..")
        try:
            out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
        except ValueError:
            raise UsageError(f"bad integer list {text!r}; use e.g. 1,2,5 or 1..7") from None
    return out


def cmd_sweep(args) -> int:
    systems = args.systems.split(",")
    for s in systems:
        if s not in SYSTEMS:
            raise UsageError(f"unknown system {s!r}")
    cbs = _parse_ints(args.cb)
    seeds = _parse_ints(args.seeds)
    for cb in cbs:
        _check_budget(args.c, args.b, cb)
    settings = _settings(args)
    coll, qids, qrels = _load(args, settings)
    if qrels is None:
        raise UsageError("sweep needs --qrels")
    rows = []
    for seed in seeds:
        ranker = _ranker(args.ranker, qrels, seed, args.latent_weights, settings)
        for system in systems:
            for cb in cbs:
                started = time.perf_counter()
                results = run_system(system, coll, qids, ranker, args.c, args.b, cb, settings, seed, args.jobs,
                                     args.override_cap)
                wall_ms = (time.perf_counter() - started) * 1000.0 / max(1, len(results))
                run = {r.query_id: [d for d, _ in r.ranked] for r in results}
                rows.append([system, cb, seed, f"{recall_at_k(run, qrels, args.c):.6f}",
                             f"{np.mean([r.calls_used for r in results]):.3f}",
                             f"{np.mean([r.ledger.simulated_latency_ms for r in results]):.3f}",
                             f"{wall_ms:.3f}"])
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["system", "cb", "seed", f"recall@{args.c}", "calls_used", "latency_ms", "wall_ms_per_query"])
        w.writerows(rows)
    print(f"{len(rows)} rows -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    qrels = load_qrels(_path(args, "qrels"))
    ks = _parse_ints(args.k)
    reports = []
    for path in args.run:
        entries = load_run(_path(argparse.Namespace(run=path), "run"))
        tag = entries[0].tag if entries else os.path.basename(path)
        reports.append(make_report(tag, run_by_query(entries), qrels, ks, args.min_grade))
    for r in reports:
        print(r.system + "\t" + "\t".join(f"{m}={r.mean(m):.4f}" for m in r.metrics))
    if args.out:
        if len(reports) == 1:
            write_metrics(reports[0], args.out)
        else:
            write_comparison(compare_systems(reports), args.out)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ore", description="Online relevance estimation for budget-constrained re-ranking.")
    parser.add_argument("--version", action="version", version=f"ore {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("build-index", help="build and save a BM25 index")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k1", type=float)
    p.add_argument("--bm25-b", type=float)
    p.add_argument("--config")
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("build-graph", help="build a top-k corpus graph")
    p.add_argument("--source", choices=("lexical", "semantic"), required=True)
    p.add_argument("--corpus")
    p.add_argument("--index")
    p.add_argument("--embeddings")
    p.add_argument("--metric", choices=("dot", "cosine"), default="dot")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("synth", help="generate a synthetic suite with planted clusters")
    p.add_argument("--out", required=True)
    for f in dataclasses.fields(SynthSpec):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=type(f.default))
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="run one system over every query")
    p.add_argument("--system", choices=SYSTEMS, required=True)
    p.add_argument("--cb", type=int, help="ranker calls in batches (default: ceil(c/b))")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--tag", help="run tag (default: system name)")
    p.add_argument("--dump-features", action="store_true")
    p.add_argument("--dump-alpha", action="store_true")
    _add_budget_args(p)
    _add_data_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="Recall@c against budget for several systems and seeds")
    p.add_argument("--systems", default="ore-adaptive,gar,quam")
    p.add_argument("--cb", default="1..7", help="e.g. 1..7 or 1,2,4")
    p.add_argument("--seeds", default="0")
    p.add_argument("--out", required=True, help="CSV path")
    _add_budget_args(p)
    _add_data_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("eval", help="metrics for one run, or a comparison table for several")
    p.add_argument("--run", action="append", required=True, help="TREC run file; repeat to compare")
    p.add_argument("--qrels", required=True)
    p.add_argument("--k", default="10,50,100")
    p.add_argument("--min-grade", type=int, default=1)
    p.add_argument("--out", help="CSV path")
    p.set_defaults(func=cmd_eval)
    return parser


def _fail(code: str, message: str) -> int:
    print(f"error[{code}]: {message}", file=sys.stderr)
    return EXIT_CODES[code]


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _fail("E_USAGE", str(exc))
    except FileNotFoundError as exc:
        return _fail("E_IO", f"no such file: {exc.filename or exc}")
    except OSError as exc:
        return _fail("E_IO", str(exc))
    except (ParseError, UnknownIdError, BudgetError, RefusalError, ValidationError) as exc:
        return _fail(exc.code, str(exc))
    except ValueError as exc:
        return _fail("E_VALIDATION", str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
