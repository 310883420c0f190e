"""Run settings, loadable from a ``[section]`` / ``key = value`` file."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields

from .errors import ValidationError
from .io import PathLike, load_config

# config-file section for each field
_SECTIONS = {
    "k1": "bm25", "b": "bm25",
    "fb_docs": "rm3", "fb_terms": "rm3", "orig_weight": "rm3",
    "graph_k": "graph", "metric": "dense",
    "s": "scheduler", "u": "scheduler", "v": "scheduler", "hybrid_depth": "scheduler",
    "adaptive_depth": "scheduler", "random_alpha_first_batch": "scheduler",
    "lam": "estimator",
    "sigma": "ranker", "latency_ms": "ranker",
    "rrf_k": "fusion", "cc_lambda": "fusion",
    "exhaustive_cap": "baselines",
}


@dataclass(frozen=True)
class Settings:
    k1: float = 0.9
    b: float = 0.4
    fb_docs: int = 3
    fb_terms: int = 10
    orig_weight: float = 0.5
    graph_k: int = 8
    metric: str = "dot"
    s: int = 10
    u: int | None = None  # None -> 2 * batch size
    v: int | None = None
    hybrid_depth: int = 1000
    adaptive_depth: int | None = None  # None -> c
    random_alpha_first_batch: bool = False
    lam: float = 1.0
    sigma: float = 0.0
    latency_ms: float = 0.0
    rrf_k: int = 60
    cc_lambda: float = 0.5
    exhaustive_cap: int = 100_000

    def __post_init__(self) -> None:
        if self.s < 1:
            raise ValidationError("s must be >= 1")
        if self.rrf_k < 1:
            raise ValidationError("rrf_k must be >= 1")
        if not 0.0 <= self.cc_lambda <= 1.0:
            raise ValidationError("cc_lambda must be in [0, 1]")
        if self.lam <= 0:
            raise ValidationError("lam must be > 0")
        if self.sigma < 0:
            raise ValidationError("sigma must be >= 0")

    def shortlist_sizes(self, b: int) -> tuple[int, int]:
        return (self.u if self.u is not None else 2 * b, self.v if self.v is not None else 2 * b)

    def replace(self, **changes) -> "Settings":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


def _coerce(field_type, raw: str):
    text = raw.strip()
    if "bool" in str(field_type):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValidationError(f"not a boolean: {raw!r}")
    if text.lower() == "none" and "None" in str(field_type):
        return None
    if "int" in str(field_type):
        return int(text)
    if "float" in str(field_type):
        return float(text)
    return text


def settings_from_file(path: PathLike, base: Settings | None = None) -> Settings:
    sections = load_config(path)
    values = {}
    known = {f.name: f for f in fields(Settings)}
    for section, items in sections.items():
        for key, raw in items.items():
            if key not in known or _SECTIONS.get(key) != section:
                raise ValidationError(f"unknown setting [{section}] {key}")
            try:
                values[key] = _coerce(known[key].type, raw)
            except ValueError as exc:
                raise ValidationError(f"bad value for [{section}] {key}: {exc}") from None
    return dataclasses.replace(base or Settings(), **values)
