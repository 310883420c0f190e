"""Online relevance estimation: ``EstRel(x) = alpha . x`` with alpha fit by ridge regression.

The ridge penalty pulls alpha toward its (random) initial value rather than
toward zero. The moment vector starts at ``lam * alpha0`` instead of 0, so
``alpha = gram^-1 moment`` holds from initialisation on::

    gram   = lam * I + sum x x^T
    moment = lam * alpha0 + sum y x

and a feature direction that has not been observed yet keeps its initial
weight instead of collapsing to 0, while observed directions converge to the
least-squares fit as samples accumulate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError


def _as_matrix(xs, dim: int) -> np.ndarray:
    if isinstance(xs, (list, tuple)):
        xs = [getattr(x, "values", x) for x in xs]
    arr = np.asarray(xs, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size else arr.reshape(0, dim)
    if arr.shape[1] != dim:
        raise ValidationError(f"feature dimension {arr.shape[1]} does not match estimator dimension {dim}")
    return arr


@dataclass
class EstimatorState:
    dim: int
    lam: float
    gram: np.ndarray
    moment: np.ndarray
    alpha: np.ndarray
    prior: np.ndarray
    seed: int = 0
    n_samples: int = 0
    history: list[np.ndarray] = field(default_factory=list, repr=False)

    def observe(self, xs, ys: Sequence[float]) -> "EstimatorState":
        """Fold a batch of (feature row, observed score) pairs into the fit."""
        X = _as_matrix(xs, self.dim)
        y = np.asarray(ys, dtype=np.float64).reshape(-1)
        if len(y) != len(X):
            raise ValidationError(f"{len(X)} feature rows but {len(y)} targets")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValidationError("non-finite sample")
        self.gram += X.T @ X
        self.moment += X.T @ y
        self.n_samples += len(y)
        self.alpha = np.linalg.solve(self.gram, self.moment)
        self.history.append(self.alpha.copy())
        return self

    def est_rel(self, x) -> float:
        x = np.asarray(getattr(x, "values", x), dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValidationError(f"feature dimension {x.shape} does not match estimator dimension {self.dim}")
        return float(self.alpha @ x)

    def est_rel_many(self, xs) -> np.ndarray:
        return _as_matrix(xs, self.dim) @ self.alpha


def init(dim: int, lam: float = 1.0, seed: int = 0) -> EstimatorState:
    """Fresh estimator with alpha drawn uniformly from ``[0, 1]^dim``."""
    if dim < 1:
        raise ValidationError(f"dim must be >= 1, got {dim}")
    if not lam > 0:
        raise ValidationError(f"ridge strength must be > 0, got {lam}")
    alpha = np.random.default_rng(seed).uniform(0.0, 1.0, dim)
    return EstimatorState(dim, float(lam), lam * np.eye(dim), lam * alpha, alpha.copy(), alpha.copy(), seed)


def observe(state: EstimatorState, batch: Iterable[tuple[object, float]]) -> EstimatorState:
    pairs = list(batch)
    if not pairs:
        return state
    xs = [np.asarray(getattr(x, "values", x), dtype=np.float64) for x, _ in pairs]
    return state.observe(np.array(xs).reshape(len(xs), -1), [y for _, y in pairs])


def est_rel(state: EstimatorState, x) -> float:
    return state.est_rel(x)


def estimation_error(state: EstimatorState, holdout: Sequence[tuple[object, float]]) -> float:
    """Mean absolute difference between EstRel and the true score."""
    if not holdout:
        raise ValidationError("holdout set is empty")
    X = _as_matrix([x for x, _ in holdout], state.dim)
    y = np.array([y for _, y in holdout], dtype=np.float64)
    return float(np.mean(np.abs(X @ state.alpha - y)))
