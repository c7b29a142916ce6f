"""Single-structure anchor-graph baselines with fixed anchors.

``fit_global`` keeps only the self-expressive reconstruction term;
``fit_local`` keeps only the distance-weighted term. Neither updates the
anchors, which default to per-view k-means centers.
"""
import time

import numpy as np

from . import qp
from .model import AnchorGraph, AnchorSet, HyperParams, MultiViewDataset
from .optimizer import (
    OptimizerState,
    _as_anchor_set,
    _check_shapes,
    init_anchors,
    squared_distances,
)


def _anchors_for(dataset, params, anchors):
    t = time.perf_counter()
    if anchors is None:
        anchors = init_anchors(dataset, params.m, "kmeans", params.seed)
    anchors = _as_anchor_set(anchors)
    _check_shapes(dataset, anchors)
    return anchors, time.perf_counter() - t


def global_qp_terms(dataset, anchors, mu):
    m = anchors.m
    Q = mu * np.eye(m)
    F = np.zeros((m, dataset.n))
    for X, A in zip(dataset.views, anchors):
        Q += A.T @ A
        F -= A.T @ X
    return 0.5 * (Q + Q.T), F


def global_objective(dataset, anchors, graph, mu):
    """``sum_p ||X_p - A_p Z||_F^2 + mu ||Z||_F^2``."""
    Z = graph.Z if isinstance(graph, AnchorGraph) else np.asarray(graph)
    total = mu * float(np.einsum("ij,ij->", Z, Z))
    for X, A in zip(dataset.views, _as_anchor_set(anchors)):
        R = X - A @ Z
        total += float(np.einsum("ij,ij->", R, R))
    return total


def fit_global(dataset: MultiViewDataset, params: HyperParams, anchors=None,
               backend=None) -> OptimizerState:
    anchors, t_init = _anchors_for(dataset, params, anchors)
    t = time.perf_counter()
    Q, F = global_qp_terms(dataset, anchors, params.mu)
    Z = qp.solve_batch(Q, F, tol=params.qp_tol, max_iters=params.qp_max_iters,
                       threads=params.threads, backend=backend, check=False)
    graph = AnchorGraph(Z)
    timings = {"init": t_init, "z_update": time.perf_counter() - t, "a_update": 0.0}
    trace = [global_objective(dataset, anchors, graph, params.mu)]
    return OptimizerState(anchors, graph, trace, 0, True, timings, anchors)


def local_graph(D, mu_local):
    """Closed-form minimizer of ``sum D * Z + mu_local ||Z||^2`` over simplex columns.

    For ``mu_local > 0`` each column is the projection of ``-d_i / (2 mu_local)``;
    for ``mu_local == 0`` it is one-hot on the nearest anchor (lowest index on ties).
    """
    D = np.asarray(D, dtype=np.float64)
    if mu_local > 0:
        return qp.project_simplex_columns(-D / (2.0 * mu_local))
    Z = np.zeros_like(D)
    Z[np.argmin(D, axis=0), np.arange(D.shape[1])] = 1.0
    return Z


def fit_local(dataset: MultiViewDataset, params: HyperParams, anchors=None,
              mu_local=None) -> OptimizerState:
    anchors, t_init = _anchors_for(dataset, params, anchors)
    mu_local = params.mu_local if mu_local is None else float(mu_local)
    t = time.perf_counter()
    D = squared_distances(dataset, anchors)
    graph = AnchorGraph(local_graph(D, mu_local))
    timings = {"init": t_init, "z_update": time.perf_counter() - t, "a_update": 0.0}
    trace = [float(np.einsum("ij,ij->", D, graph.Z)
                   + mu_local * np.einsum("ij,ij->", graph.Z, graph.Z))]
    return OptimizerState(anchors, graph, trace, 0, True, timings, anchors)
