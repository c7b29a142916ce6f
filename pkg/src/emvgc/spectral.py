"""SVD embedding of the anchor graph and k-means on the embedding."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateInputError, InvalidParameterError, RankDeficientWarning
from .linalg import economy_svd
from .model import AnchorGraph


@dataclass(frozen=True)
class Embedding:
    H: np.ndarray
    singular_values: np.ndarray
    rank_deficient: bool = False


def _fix_signs(V):
    # largest-magnitude entry of every column made nonnegative (first on ties)
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def embed(graph, k, scale="none") -> Embedding:
    """Sample embedding from the top-``k`` right singular vectors of ``Z`` (m x n).

    ``scale`` multiplies the singular vectors by ``sigma`` or ``sqrt(sigma)``;
    the default leaves them unscaled. Directions whose singular value is
    below ``1e-12 * max(1, sigma_1)`` are zeroed and the result is flagged
    rank-deficient.
    """
    Z = graph.Z if isinstance(graph, AnchorGraph) else np.asarray(graph, dtype=np.float64)
    m = Z.shape[0]
    if not (1 <= k <= m):
        raise InvalidParameterError(f"need 1 <= k <= m, got k={k}, m={m}")
    _, s, Vt = economy_svd(Z)
    V = _fix_signs(Vt[:k].T)
    sk = s[:k].copy()
    if scale == "sigma":
        V = V * sk
    elif scale == "sqrt_sigma":
        V = V * np.sqrt(sk)
    elif scale != "none":
        raise InvalidParameterError(f"unknown embedding scale {scale!r}")
    tiny = sk <= 1e-12 * max(1.0, s[0] if s.size else 0.0)
    if tiny.any():
        V[:, tiny] = 0.0
        warnings.warn(
            f"anchor graph has only {int((~tiny).sum())} non-negligible singular values "
            f"for k={k}; embedding zero-padded",
            RankDeficientWarning,
            stacklevel=2,
        )
    return Embedding(V, s, bool(tiny.any()))


@dataclass(frozen=True)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: tuple
    restart: int = 0


def _sq_dists(X, C, xx):
    D = xx[:, None] - 2.0 * X @ C.T + np.einsum("ij,ij->i", C, C)[None, :]
    return np.maximum(D, 0.0)


def _plusplus(X, k, rng, xx):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    closest = _sq_dists(X, centers[:1], xx)[:, 0]
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # only duplicates of chosen centers remain
            raise DegenerateInputError(f"fewer than k={k} distinct points")
        pick = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
        pick = min(pick, n - 1)
        while closest[pick] <= 0.0:
            pick = (pick + 1) % n
        centers[c] = X[pick]
        closest = np.minimum(closest, _sq_dists(X, centers[c:c + 1], xx)[:, 0])
    return centers


def _lloyd(X, centers, max_iter, tol, xx):
    n, k = X.shape[0], centers.shape[0]
    history = []
    labels = None
    it = 0
    for it in range(1, max_iter + 1):
        D = _sq_dists(X, centers, xx)
        new = np.argmin(D, axis=1)
        cost = D[np.arange(n), new]
        counts = np.bincount(new, minlength=k)
        for _ in range(k):
            empty = np.flatnonzero(counts == 0)
            if empty.size == 0:
                break
            for c in empty:
                # reseed the empty cluster at the point farthest from its center
                far = int(np.argmax(cost))
                counts[new[far]] -= 1
                new[far] = c
                counts[c] += 1
                cost[far] = 0.0
                centers[c] = X[far]
        history.append(float(np.sum((X - centers[new]) ** 2)))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            centers[c] = X[labels == c].mean(axis=0)
        if len(history) > 1 and history[-2] - history[-1] <= tol * max(history[-2], 1e-300):
            break
    inertia = float(np.sum((X - centers[labels]) ** 2))
    history.append(inertia)
    return labels, centers, inertia, it, tuple(history)


def kmeans_fit(X, k, restarts=10, seed=0, max_iter=100, tol=1e-6) -> KMeansResult:
    """k-means++ seeded Lloyd iterations; the lowest-inertia restart wins.

    ``X`` is (n_samples, n_features). Restart ``r`` draws from the ``r``-th
    child of ``SeedSequence(seed)``, so results do not depend on how many
    restarts run before it. Ties in inertia go to the lowest restart index.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if k < 1 or restarts < 1:
        raise InvalidParameterError("k and restarts must be >= 1")
    n = X.shape[0]
    if n < k or np.unique(X, axis=0).shape[0] < k:
        raise DegenerateInputError(f"fewer than k={k} distinct points")
    xx = np.einsum("ij,ij->i", X, X)
    best = None
    for r, ss in enumerate(np.random.SeedSequence(seed).spawn(restarts)):
        rng = np.random.default_rng(ss)
        centers = _plusplus(X, k, rng, xx)
        labels, centers, inertia, n_iter, hist = _lloyd(X, centers, max_iter, tol, xx)
        if best is None or inertia < best.inertia:
            best = KMeansResult(labels.astype(np.int64), centers, inertia, n_iter, hist, r)
    return best


def kmeans(H, k, restarts=10, seed=0, max_iter=100, tol=1e-6):
    """Cluster labels for the rows of ``H`` (see :func:`kmeans_fit`)."""
    if isinstance(H, Embedding):
        H = H.H
    return kmeans_fit(H, k, restarts=restarts, seed=seed, max_iter=max_iter, tol=tol).labels
