"""Domain types shared by the optimizer, baselines and harness.

All matrices are stored features x samples, as float64, and are frozen
(``writeable=False``) once wrapped in one of these containers.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    EmptyViewError,
    InvalidParameterError,
    NonFiniteError,
    ValidationError,
)


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def validate(views, labels=None):
    """Check multi-view data invariants; raise on the first violation.

    Parameters
    ----------
    views : sequence of array-like, each (d_p, n)
    labels : array-like of int, shape (n,), optional
    """
    if len(views) == 0:
        raise EmptyViewError("dataset has no views")
    n = None
    for p, X in enumerate(views):
        X = np.asarray(X)
        if X.ndim != 2:
            raise DimensionMismatchError(f"view {p} is {X.ndim}-D, expected 2-D (d_p x n)")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise EmptyViewError(f"view {p} has shape {X.shape}")
        if n is None:
            n = X.shape[1]
        elif X.shape[1] != n:
            raise DimensionMismatchError(
                f"view {p} has {X.shape[1]} samples, view 0 has {n}"
            )
        if not np.all(np.isfinite(X)):
            raise NonFiniteError(f"view {p} contains non-finite entries")
    if n < 2:
        raise DimensionMismatchError(f"need at least 2 samples, got {n}")
    if labels is not None:
        y = np.asarray(labels)
        if y.ndim != 1 or y.shape[0] != n:
            raise DimensionMismatchError(f"labels have shape {y.shape}, expected ({n},)")
        if not np.issubdtype(y.dtype, np.integer):
            if not np.all(np.isfinite(y)) or not np.all(y == np.round(y)):
                raise ValidationError("labels must be integers")


@dataclass(frozen=True)
class MultiViewDataset:
    views: tuple
    labels: Optional[np.ndarray] = None
    name: str = "dataset"

    def __post_init__(self):
        validate(self.views, self.labels)
        object.__setattr__(self, "views", tuple(_frozen(X) for X in self.views))
        if self.labels is not None:
            y = np.asarray(self.labels).astype(np.int64)
            # every class present in the vector has >= 1 member by construction
            object.__setattr__(self, "labels", _frozen(y, np.int64))

    @property
    def n(self) -> int:
        return self.views[0].shape[1]

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> tuple:
        return tuple(X.shape[0] for X in self.views)

    @property
    def n_classes(self) -> Optional[int]:
        if self.labels is None:
            return None
        return int(np.unique(self.labels).size)

    def total_energy(self) -> float:
        """Sum over views of tr(X^T X), the constant offset of the objective."""
        return float(sum(np.einsum("ij,ij->", X, X) for X in self.views))


@dataclass(frozen=True)
class AnchorSet:
    anchors: tuple

    def __post_init__(self):
        if len(self.anchors) == 0:
            raise EmptyViewError("anchor set has no views")
        mats = tuple(_frozen(A) for A in self.anchors)
        m = mats[0].shape[1]
        for p, A in enumerate(mats):
            if A.ndim != 2 or A.shape[1] != m or m < 1:
                raise DimensionMismatchError(
                    f"anchor matrix {p} has shape {A.shape}; expected (d_p, {m})"
                )
            if not np.all(np.isfinite(A)):
                raise NonFiniteError(f"anchor matrix {p} has non-finite entries")
        object.__setattr__(self, "anchors", mats)

    @property
    def m(self) -> int:
        return self.anchors[0].shape[1]

    def __len__(self):
        return len(self.anchors)

    def __getitem__(self, p):
        return self.anchors[p]

    def __iter__(self):
        return iter(self.anchors)


@dataclass(frozen=True)
class AnchorGraph:
    """Consensus anchor graph Z (m x n), every column on the probability simplex."""

    Z: np.ndarray
    atol: float = 1e-8

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=np.float64)
        if Z.ndim != 2:
            raise DimensionMismatchError(f"anchor graph must be 2-D, got {Z.ndim}-D")
        if not np.all(np.isfinite(Z)):
            raise NonFiniteError("anchor graph has non-finite entries")
        if Z.min(initial=0.0) < 0.0:
            raise ValidationError(f"anchor graph has negative entry {Z.min():.3e}")
        err = np.abs(Z.sum(axis=0) - 1.0).max(initial=0.0)
        if err > self.atol:
            raise ValidationError(f"anchor graph column sums deviate from 1 by {err:.3e}")
        object.__setattr__(self, "Z", _frozen(Z))

    @property
    def m(self) -> int:
        return self.Z.shape[0]

    @property
    def n(self) -> int:
        return self.Z.shape[1]


@dataclass(frozen=True)
class HyperParams:
    """Hyperparameters for the combined optimizer and its baselines.

    ``mu`` is the free regularization weight; the local baseline's
    coefficient is derived as ``mu / lam``.
    """

    lam: float = 0.1
    mu: float = 1.0
    m: int = 5
    k: int = 5
    max_outer_iters: int = 50
    rel_tol: float = 1e-6
    qp_tol: float = 1e-8
    qp_max_iters: int = 1000
    seed: int = 0
    anchor_init: str = "sample"
    kmeans_restarts: int = 10
    kmeans_seed: Optional[int] = None
    embedding_scale: str = "none"
    threads: int = 1

    def __post_init__(self):
        if not (0.0 < self.lam <= 1.0):
            raise InvalidParameterError(f"lambda must lie in (0, 1], got {self.lam}")
        if not (self.mu >= 0.0) or not np.isfinite(self.mu):
            raise InvalidParameterError(f"mu must be finite and >= 0, got {self.mu}")
        if not (1 <= self.k <= self.m):
            raise InvalidParameterError(f"need 1 <= k <= m, got k={self.k}, m={self.m}")
        if self.max_outer_iters < 1:
            raise InvalidParameterError("max_outer_iters must be >= 1")
        if self.rel_tol < 0 or self.qp_tol <= 0:
            raise InvalidParameterError("tolerances must be positive")
        if self.anchor_init not in ("sample", "kmeans"):
            raise InvalidParameterError(f"unknown anchor_init {self.anchor_init!r}")
        if self.kmeans_restarts < 1:
            raise InvalidParameterError("kmeans_restarts must be >= 1")
        if self.embedding_scale not in ("none", "sigma", "sqrt_sigma"):
            raise InvalidParameterError(f"unknown embedding_scale {self.embedding_scale!r}")
        if self.threads < 1:
            raise InvalidParameterError("threads must be >= 1")

    @property
    def mu_local(self) -> float:
        """Coefficient of the local baseline's ridge term, mu / lambda."""
        return self.mu / self.lam

    def check_against(self, n: int):
        if self.m > n:
            raise InvalidParameterError(f"anchor count m={self.m} exceeds sample count n={n}")

    def replace(self, **changes) -> "HyperParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class RunReport:
    labels: np.ndarray
    embedding: np.ndarray
    objective_trace: list
    iterations: int
    timings: dict = field(default_factory=dict)
    metrics: Optional[dict] = None
    config: dict = field(default_factory=dict)

    def to_dict(self, include_arrays: bool = False) -> dict:
        out = {
            "iterations": int(self.iterations),
            "objective_trace": [float(v) for v in self.objective_trace],
            "timings": {k: float(v) for k, v in self.timings.items()},
            "metrics": None if self.metrics is None else {k: float(v) for k, v in self.metrics.items()},
            "config": self.config,
        }
        if include_arrays:
            out["labels"] = [int(v) for v in self.labels]
        return out


def make_dataset(views: Sequence, labels=None, name: str = "dataset") -> MultiViewDataset:
    return MultiViewDataset(views=tuple(views), labels=labels, name=name)
