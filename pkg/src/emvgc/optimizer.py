"""Alternating optimizer for the combined local + global anchor-graph objective.

The objective, for views ``X_p`` (d_p x n), anchors ``A_p`` (d_p x m) and a
column-stochastic graph ``Z`` (m x n), is::

    sum_p ||A_p Z||_F^2 - 2 sum_p tr(X_p' A_p Z)
      + lam * sum_p tr(A_p diag(Z 1) A_p') + mu * ||Z||_F^2

Each block update is an exact minimizer, so the objective never rises.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import qp
from .exceptions import DimensionMismatchError, InvalidParameterError, SingularSystemError
from .linalg import sym_solve
from .model import AnchorGraph, AnchorSet, HyperParams, MultiViewDataset


@dataclass
class OptimizerState:
    anchors: AnchorSet
    graph: AnchorGraph
    objective_trace: list = field(default_factory=list)
    iteration: int = 0
    converged: bool = False
    timings: dict = field(default_factory=dict)
    initial_anchors: Optional[AnchorSet] = None


def _check_shapes(dataset, anchors, Z=None):
    if len(anchors) != dataset.n_views:
        raise DimensionMismatchError(
            f"{len(anchors)} anchor matrices for {dataset.n_views} views"
        )
    for p, (X, A) in enumerate(zip(dataset.views, anchors)):
        if A.shape[0] != X.shape[0]:
            raise DimensionMismatchError(
                f"view {p}: anchors have {A.shape[0]} features, data has {X.shape[0]}"
            )
    if Z is not None:
        if Z.shape != (anchors.m, dataset.n):
            raise DimensionMismatchError(
                f"graph has shape {Z.shape}, expected ({anchors.m}, {dataset.n})"
            )


def _as_anchor_set(anchors):
    return anchors if isinstance(anchors, AnchorSet) else AnchorSet(tuple(anchors))


def _as_matrix(graph):
    return graph.Z if isinstance(graph, AnchorGraph) else np.asarray(graph, dtype=np.float64)


def local_affinity(anchors):
    """Per-view squared anchor norms ``q_p[j] = ||A_p[:, j]||^2``.

    ``q_p`` is the (repeated) row of the matrix M_p for which
    ``tr(M_p Z) = q_p . (Z 1) = tr(A_p diag(Z 1) A_p')``.
    """
    return [np.einsum("ij,ij->j", A, A) for A in _as_anchor_set(anchors)]


def trace_MZ(q, Z):
    """``tr(M Z)`` from the anchor norms ``q`` without forming M."""
    return float(q @ np.asarray(Z).sum(axis=1))


def objective(dataset, anchors, graph, lam, mu) -> float:
    anchors = _as_anchor_set(anchors)
    Z = _as_matrix(graph)
    _check_shapes(dataset, anchors, Z)
    ZZt = Z @ Z.T
    mass = Z.sum(axis=1)
    total = mu * float(np.einsum("ij,ij->", Z, Z))
    for X, A in zip(dataset.views, anchors):
        total += float(np.einsum("ij,ij->", A.T @ A, ZZt))
        total -= 2.0 * float(np.einsum("ij,ij->", A, X @ Z.T))
        total += lam * float(np.einsum("ij,ij->j", A, A) @ mass)
    return total


def anchor_gradient(X, A, Z, lam):
    """Gradient of the objective in one view's anchors, ``2A(ZZ' + lam D) - 2XZ'``."""
    G = Z @ Z.T + lam * np.diag(Z.sum(axis=1))
    return 2.0 * A @ G - 2.0 * X @ Z.T


def update_anchors(dataset, graph, lam) -> AnchorSet:
    """Closed-form anchors ``A_p = X_p Z' (ZZ' + lam diag(Z1))^{-1}`` for every view.

    The system is solved as-is when it is positive definite; otherwise a
    jitter of ``1e-10 * tr(G) / m`` is added to the diagonal first.
    """
    if lam <= 0:
        raise InvalidParameterError(f"lambda must be > 0 for the anchor update, got {lam}")
    Z = _as_matrix(graph)
    m = Z.shape[0]
    G = Z @ Z.T + lam * np.diag(Z.sum(axis=1))
    rhs = np.concatenate([(X @ Z.T).T for X in dataset.views], axis=1)  # m x sum(d)
    sol = None
    d = np.diag(G)
    if d.min() > 0.0 and d.min() > 1e-14 * d.max():
        try:
            sol = sym_solve(G, rhs)
        except np.linalg.LinAlgError:
            sol = None
    if sol is None or not np.all(np.isfinite(sol)):
        jitter = 1e-10 * max(np.trace(G), 1e-300) / m
        try:
            sol = sym_solve(G + jitter * np.eye(m), rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularSystemError(
                "anchor update system is singular even after jitter; "
                "the anchor graph is degenerate"
            ) from exc
        if not np.all(np.isfinite(sol)):
            raise SingularSystemError("anchor update produced non-finite anchors")
    out = []
    start = 0
    for X in dataset.views:
        d_p = X.shape[0]
        out.append(sol[:, start:start + d_p].T)
        start += d_p
    return AnchorSet(tuple(out))


def graph_qp_terms(dataset, anchors, lam, mu):
    """``(Q, F)`` of the per-column simplex QPs whose sum is half the objective.

    ``Q = sum_p A_p'A_p + mu I`` and ``F[:, i] = -sum_p A_p' x_i + (lam/2) sum_p q_p``.
    """
    anchors = _as_anchor_set(anchors)
    _check_shapes(dataset, anchors)
    m = anchors.m
    Q = mu * np.eye(m)
    F = np.zeros((m, dataset.n))
    qsum = np.zeros(m)
    for X, A in zip(dataset.views, anchors):
        Q += A.T @ A
        F -= A.T @ X
        qsum += np.einsum("ij,ij->j", A, A)
    F += 0.5 * lam * qsum[:, None]
    return 0.5 * (Q + Q.T), F


def update_graph(dataset, anchors, lam, mu, qp_tol=qp.DEFAULT_TOL,
                 qp_max_iters=qp.DEFAULT_MAX_ITERS, warm_start=None,
                 on_fail="warn", threads=1, backend=None) -> AnchorGraph:
    """Exact minimization of the objective over the simplex-constrained graph."""
    Q, F = graph_qp_terms(dataset, anchors, lam, mu)
    ws = _as_matrix(warm_start) if warm_start is not None else None
    Z = qp.solve_batch(Q, F, tol=qp_tol, max_iters=qp_max_iters, warm_start=ws,
                       on_fail=on_fail, threads=threads, backend=backend, check=False)
    return AnchorGraph(Z)


def init_anchors(dataset, m, method="sample", seed=0) -> AnchorSet:
    """Initial anchors.

    ``sample`` picks the same ``m`` random sample columns in every view, so
    anchor ``j`` starts as one real multi-view sample. ``kmeans`` runs
    k-means with ``m`` centers separately in each view.
    """
    n = dataset.n
    if not (1 <= m <= n):
        raise InvalidParameterError(f"need 1 <= m <= n, got m={m}, n={n}")
    if method == "sample":
        idx = np.random.default_rng(seed).choice(n, size=m, replace=False)
        return AnchorSet(tuple(X[:, idx] for X in dataset.views))
    if method == "kmeans":
        from .spectral import kmeans_fit

        seeds = np.random.SeedSequence(seed).spawn(dataset.n_views)
        out = []
        for X, ss in zip(dataset.views, seeds):
            res = kmeans_fit(X.T, m, restarts=1, seed=int(ss.generate_state(1)[0]))
            out.append(res.centers.T)
        return AnchorSet(tuple(out))
    raise InvalidParameterError(f"unknown anchor init {method!r}")


def _rel_change(prev, cur):
    return abs(prev - cur) / max(abs(prev), 1e-300)


def fit(dataset: MultiViewDataset, params: HyperParams, anchors=None,
        learn_anchors=True, backend=None) -> OptimizerState:
    """Alternate graph and anchor updates from the initial anchors.

    Each outer iteration solves for the graph with the anchors fixed, then for
    the anchors with the graph fixed. ``objective_trace[0]`` is the value after
    the first graph update; one entry follows every completed iteration.
    Stops when the relative change drops below ``params.rel_tol`` or after
    ``params.max_outer_iters`` iterations.

    With ``learn_anchors=False`` the anchors stay at their initial value and
    a single graph update is performed.
    """
    params.check_against(dataset.n)
    timings = {"init": 0.0, "z_update": 0.0, "a_update": 0.0}
    t0 = time.perf_counter()
    if anchors is None:
        anchors = init_anchors(dataset, params.m, params.anchor_init, params.seed)
    anchors = _as_anchor_set(anchors)
    if anchors.m != params.m:
        raise DimensionMismatchError(f"{anchors.m} initial anchors, params.m = {params.m}")
    _check_shapes(dataset, anchors)
    initial = anchors
    timings["init"] = time.perf_counter() - t0

    def z_step(A, Z):
        t = time.perf_counter()
        out = update_graph(dataset, A, params.lam, params.mu, params.qp_tol,
                           params.qp_max_iters, warm_start=Z, threads=params.threads,
                           backend=backend)
        timings["z_update"] += time.perf_counter() - t
        return out

    def a_step(Z):
        t = time.perf_counter()
        out = update_anchors(dataset, Z, params.lam)
        timings["a_update"] += time.perf_counter() - t
        return out

    graph = z_step(anchors, None)
    trace = [objective(dataset, anchors, graph, params.lam, params.mu)]
    if not learn_anchors:
        return OptimizerState(anchors, graph, trace, 0, True, timings, initial)

    converged = False
    it = 0
    while it < params.max_outer_iters:
        if it > 0:
            graph = z_step(anchors, graph)
        anchors = a_step(graph)
        it += 1
        trace.append(objective(dataset, anchors, graph, params.lam, params.mu))
        if _rel_change(trace[-2], trace[-1]) < params.rel_tol:
            converged = True
            break
    return OptimizerState(anchors, graph, trace, it, converged, timings, initial)


def squared_distances(dataset, anchors):
    """``D[j, i] = sum_p ||x_i^(p) - a_j^(p)||^2`` (m x n)."""
    anchors = _as_anchor_set(anchors)
    _check_shapes(dataset, anchors)
    D = np.zeros((anchors.m, dataset.n))
    for X, A in zip(dataset.views, anchors):
        D += (np.einsum("ij,ij->j", A, A)[:, None] - 2.0 * A.T @ X
              + np.einsum("ij,ij->j", X, X)[None, :])
    return np.maximum(D, 0.0)


def local_objective(dataset, anchors, graph, mu_local) -> float:
    """Distance-weighted local objective ``sum D * Z + mu_local ||Z||_F^2``."""
    Z = _as_matrix(graph)
    D = squared_distances(dataset, anchors)
    return float(np.einsum("ij,ij->", D, Z) + mu_local * np.einsum("ij,ij->", Z, Z))


def check_proposition1(dataset, anchors, graph, lam, mu) -> dict:
    """Upper-bound relation between the combined and the local objective.

    Returns ``lhs = objective + sum_p tr(X_p'X_p)`` and
    ``rhs = lam * local_objective(mu_local = mu / lam)``; for ``0 < lam <= 1``
    and a column-stochastic graph, ``lhs >= rhs``. The gap equals
    ``lam * sum_p ||A_p Z||^2 + (1 - lam) * sum_p ||X_p - A_p Z||^2``.
    """
    if not (0.0 < lam <= 1.0):
        raise InvalidParameterError(f"lambda must lie in (0, 1], got {lam}")
    anchors = _as_anchor_set(anchors)
    lhs = objective(dataset, anchors, graph, lam, mu) + dataset.total_energy()
    rhs = lam * local_objective(dataset, anchors, graph, mu / lam)
    return {"lhs": lhs, "rhs": rhs}
