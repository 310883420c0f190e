"""Builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from ore.collection import Collection
from ore.dense import DenseScorer
from ore.graph import AffinityGraph
from ore.io import Document, EmbeddingTable, Qrels, Query
from ore.lexical import build_index
from ore.synth import SynthSpec, generate


def docs(**texts: str) -> list[Document]:
    return [Document(k, v) for k, v in texts.items()]


def table(doc_vecs: dict[str, list[float]], query_vecs: dict[str, list[float]] | None = None) -> EmbeddingTable:
    query_vecs = query_vecs or {}
    dim = len(next(iter(doc_vecs.values())))
    return EmbeddingTable(dim, tuple(doc_vecs), np.array(list(doc_vecs.values()), dtype=float),
                          tuple(query_vecs), np.array(list(query_vecs.values()), dtype=float).reshape(-1, dim))


def synth_collection(seed: int = 0, with_graph: bool = True, **kw):
    data = generate(SynthSpec(seed=seed, **kw))
    coll = Collection.create(build_index(data.corpus), data.queries, DenseScorer(data.embeddings),
                             graph=data.graph if with_graph else None)
    return data, coll


def planted_cluster():
    """One query, one cluster of five. ``c0`` holds the query term once and ranks
    just below four decoys (``x0``..``x3``) that hold it twice; ``c1``..``c4`` are
    reachable only through the graph. Decoys and their filler neighbours
    (``z0``..``z7``) link to each other, so the graph features have a range."""
    texts = {"c0": "apple zeta zeta"}
    for i in range(1, 5):
        texts[f"c{i}"] = "zeta zeta kappa"
    for i in range(4):
        texts[f"x{i}"] = "apple apple filler"
    for i in range(8):
        texts[f"z{i}"] = f"noise{i} other"
    corpus = docs(**texts)
    cluster = [f"c{i}" for i in range(5)]
    adjacency = {d: [(m, 0.9) for m in cluster if m != d] for d in cluster}
    for i in range(4):
        adjacency[f"x{i}"] = [(f"z{2 * i}", 0.5), (f"z{2 * i + 1}", 0.5)]
    for j in range(8):
        adjacency[f"z{j}"] = [(f"x{j // 2}", 0.5)]
    graph = AffinityGraph(4, adjacency, "laff")
    grades = {("q", d): 3 for d in cluster}
    coll = Collection.create(build_index(corpus), [Query("q", "apple")], None, None, graph)
    return coll, Qrels(grades), cluster
