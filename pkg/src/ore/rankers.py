"""The expensive ranker and its budget accounting.

Neural cross-encoders are replaced by reproducible stand-ins: a graded oracle
built from qrels, a latent linear oracle over feature vectors, and a replay of
cached scores. Every ranker exposes ``score(query_id, doc_ids, features=None)``
and must be a pure function of its inputs and seed.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .errors import BudgetError, ParseError, UnknownIdError, ValidationError
from .io import PathLike, Qrels


class Ranker(Protocol):
    def score(self, query_id: str, doc_ids: Sequence[str], features: np.ndarray | None = None) -> np.ndarray: ...


@dataclass(frozen=True)
class RankerCall:
    query_id: str
    doc_id: str
    score: float
    call_index: int
    simulated_latency_ms: float


@dataclass
class BudgetLedger:
    """Per-query scoring budget: ``c`` total, batches of ``b``, at most ``cb`` batches."""

    c: int
    b: int
    cb: int | None = None
    per_call_latency_ms: float = 0.0
    calls_used: int = 0
    batches: int = 0

    def __post_init__(self) -> None:
        if self.b < 1:
            raise ValidationError(f"batch size b must be >= 1, got {self.b}")
        if self.c < self.b:
            raise ValidationError(f"budget c={self.c} must be >= batch size b={self.b}")
        full = math.ceil(self.c / self.b)
        if self.cb is None:
            self.cb = full
        if self.cb < 1 or self.cb > full:
            raise ValidationError(f"cb={self.cb} outside 1..ceil(c/b)={full}")

    @property
    def cap(self) -> int:
        return min(self.c, self.cb * self.b)

    @property
    def remaining(self) -> int:
        return self.cap - self.calls_used

    def next_batch_size(self) -> int:
        return min(self.b, self.remaining)

    @property
    def simulated_latency_ms(self) -> float:
        return self.calls_used * self.per_call_latency_ms

    def batched_latency_ms(self, per_batch_ms: float | None = None) -> float:
        """Latency when each (possibly partial) batch costs ``per_batch_ms``."""
        if per_batch_ms is None:
            per_batch_ms = self.b * self.per_call_latency_ms
        return math.ceil(self.calls_used / self.b) * per_batch_ms

    def fresh(self) -> "BudgetLedger":
        return BudgetLedger(self.c, self.b, self.cb, self.per_call_latency_ms)


def score_batch(ranker: Ranker, query_id: str, doc_ids: Sequence[str], ledger: BudgetLedger,
                features: np.ndarray | None = None) -> list[RankerCall]:
    """Score one batch and charge it to ``ledger``."""
    n = len(doc_ids)
    if n > ledger.b:
        raise BudgetError(f"batch of {n} exceeds batch size b={ledger.b}")
    if n > ledger.remaining:
        raise BudgetError(f"batch of {n} exceeds remaining budget {ledger.remaining}")
    if n == 0:
        return []
    scores = np.asarray(ranker.score(query_id, doc_ids, features), dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValidationError(f"ranker returned a non-finite score for query {query_id}")
    start = ledger.calls_used
    ledger.calls_used += n
    ledger.batches += 1
    return [
        RankerCall(query_id, d, float(s), start + i, ledger.per_call_latency_ms)
        for i, (d, s) in enumerate(zip(doc_ids, scores))
    ]


def pair_noise(seed: int, query_id: str, doc_id: str) -> float:
    """Standard normal draw fixed by ``(seed, query_id, doc_id)``."""
    digest = hashlib.blake2b(f"{seed}\x1f{query_id}\x1f{doc_id}".encode("utf-8"), digest_size=16).digest()
    a, b = struct.unpack("<QQ", digest)
    u1 = (a + 1) / 18446744073709551617.0  # (0, 1]
    u2 = b / 18446744073709551616.0
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


class GradedOracle:
    """``grade(q, d) + N(0, sigma)`` with per-pair deterministic noise."""

    def __init__(self, qrels: Qrels, sigma: float = 0.0, seed: int = 0) -> None:
        if sigma < 0:
            raise ValidationError(f"sigma must be >= 0, got {sigma}")
        self.qrels = qrels
        self.sigma = float(sigma)
        self.seed = seed

    def score(self, query_id, doc_ids, features=None):
        out = np.array([float(self.qrels.grade(query_id, d)) for d in doc_ids])
        if self.sigma > 0:
            out += self.sigma * np.array([pair_noise(self.seed, query_id, d) for d in doc_ids])
        return out


class LatentLinearOracle:
    """``w . x_d + N(0, sigma)``.

    ``x_d`` comes from ``feature_fn(query_id, doc_id)`` when given, otherwise
    from the feature rows the caller passes alongside the batch.
    """

    def __init__(self, feature_fn: Callable[[str, str], Sequence[float]] | None, w: Sequence[float],
                 sigma: float = 0.0, seed: int = 0, dim: int | None = None) -> None:
        if sigma < 0:
            raise ValidationError(f"sigma must be >= 0, got {sigma}")
        self.feature_fn = feature_fn
        self.w = np.asarray(w, dtype=np.float64)
        if dim is not None and dim != len(self.w):
            raise ValidationError(f"weight vector has {len(self.w)} entries, features have {dim}")
        self.sigma = float(sigma)
        self.seed = seed

    def score(self, query_id, doc_ids, features=None):
        if self.feature_fn is not None:
            x = np.array([np.asarray(self.feature_fn(query_id, d), dtype=np.float64) for d in doc_ids])
        elif features is not None:
            x = np.asarray(features, dtype=np.float64)
        else:
            raise ValidationError("latent oracle needs a feature_fn or per-batch features")
        x = x.reshape(len(doc_ids), -1)
        if x.shape[1] != len(self.w):
            raise ValidationError(f"weight vector has {len(self.w)} entries, features have {x.shape[1]}")
        out = x @ self.w
        if self.sigma > 0:
            out = out + self.sigma * np.array([pair_noise(self.seed, query_id, d) for d in doc_ids])
        return out


class CachedRanker:
    """Replays ``qid<TAB>did<TAB>score`` lines exported from a real ranker."""

    def __init__(self, scores: dict[tuple[str, str], float]) -> None:
        self.scores = dict(scores)

    @classmethod
    def from_file(cls, path: PathLike) -> "CachedRanker":
        scores = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    raise ParseError("expected qid<TAB>did<TAB>score", line=lineno, path=str(path))
                try:
                    s = float(parts[2])
                except ValueError:
                    raise ParseError(f"bad score {parts[2]!r}", line=lineno, path=str(path)) from None
                if not math.isfinite(s):
                    raise ParseError("non-finite score", line=lineno, path=str(path))
                scores[(parts[0], parts[1])] = s
        return cls(scores)

    def score(self, query_id, doc_ids, features=None):
        out = []
        for d in doc_ids:
            try:
                out.append(self.scores[(query_id, d)])
            except KeyError:
                raise UnknownIdError(f"no cached score for ({query_id}, {d})") from None
        return np.array(out, dtype=np.float64)


def graded_oracle(qrels: Qrels, sigma: float = 0.0, seed: int = 0) -> GradedOracle:
    return GradedOracle(qrels, sigma, seed)


def latent_linear_oracle(feature_fn, w, sigma: float = 0.0, seed: int = 0, dim: int | None = None) -> LatentLinearOracle:
    return LatentLinearOracle(feature_fn, w, sigma, seed, dim)


def cached_ranker(path: PathLike) -> CachedRanker:
    return CachedRanker.from_file(path)
