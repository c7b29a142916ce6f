"""Slow, obviously-correct reference computations used only by the tests."""
import itertools

import numpy as np


def qp_enumeration(Q, f):
    """Minimizer of 0.5 z'Qz + f'z on the simplex by trying every support set.

    For each nonempty support S the equality-constrained KKT system is solved
    (least squares, so singular faces still yield a stationary point); primal
    feasible candidates are kept and the lowest objective wins. Returns
    ``(z_best, obj_best, candidates)`` with candidates a list of ``(z, obj)``.
    """
    Q = np.asarray(Q, dtype=float)
    f = np.asarray(f, dtype=float)
    m = f.size
    cands = []
    for size in range(1, m + 1):
        for S in itertools.combinations(range(m), size):
            S = list(S)
            s = len(S)
            K = np.zeros((s + 1, s + 1))
            K[:s, :s] = Q[np.ix_(S, S)]
            K[:s, s] = 1.0
            K[s, :s] = 1.0
            rhs = np.concatenate([-f[S], [1.0]])
            sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
            if np.linalg.norm(K @ sol - rhs) > 1e-8 * (1 + np.linalg.norm(rhs)):
                continue
            zS = sol[:s]
            if zS.min() < -1e-10:
                continue
            z = np.zeros(m)
            z[S] = np.maximum(zS, 0.0)
            z /= z.sum()
            cands.append((z, 0.5 * z @ Q @ z + f @ z))
    best = min(cands, key=lambda c: c[1])
    return best[0], best[1], cands


def projection_enumeration(v):
    v = np.asarray(v, dtype=float)
    z, _, _ = qp_enumeration(np.eye(v.size), -v)
    return z


def objective_loops(views, anchors, Z, lam, mu):
    """Term-by-term objective with explicit loops over samples, anchors, features."""
    m, n = Z.shape
    total = 0.0
    for X, A in zip(views, anchors):
        d = X.shape[0]
        # ||A Z||_F^2
        for i in range(n):
            for r in range(d):
                acc = 0.0
                for j in range(m):
                    acc += A[r, j] * Z[j, i]
                total += acc * acc
        # -2 tr(X' A Z)
        for i in range(n):
            for r in range(d):
                for j in range(m):
                    total -= 2.0 * X[r, i] * A[r, j] * Z[j, i]
        # lam tr(A diag(Z1) A')
        for j in range(m):
            mass = sum(Z[j, i] for i in range(n))
            for r in range(d):
                total += lam * A[r, j] * A[r, j] * mass
    for j in range(m):
        for i in range(n):
            total += mu * Z[j, i] * Z[j, i]
    return total


def assignment_bruteforce(cost):
    cost = np.asarray(cost, dtype=float)
    k = cost.shape[0]
    best = None
    for perm in itertools.permutations(range(k)):
        c = sum(cost[i, perm[i]] for i in range(k))
        if best is None or c < best[0]:
            best = (c, perm)
    return best


def accuracy_bruteforce(pred, truth):
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    pl = np.unique(pred)
    tl = np.unique(truth)
    size = max(len(pl), len(tl))
    best = 0
    for perm in itertools.permutations(range(size)):
        hits = 0
        for a, p in enumerate(pl):
            b = perm[a]
            if b < len(tl):
                hits += int(np.sum((pred == p) & (truth == tl[b])))
        best = max(best, hits)
    return best / pred.size


def fscore_pairs(pred, truth):
    n = len(pred)
    same_p = same_t = both = 0
    for i in range(n):
        for j in range(i + 1, n):
            sp = pred[i] == pred[j]
            st = truth[i] == truth[j]
            same_p += sp
            same_t += st
            both += sp and st
    P = both / same_p if same_p else 1.0
    R = both / same_t if same_t else 1.0
    return 0.0 if P + R == 0 else 2 * P * R / (P + R)


def best_partition_1d(points, k):
    """Exhaustive minimum-inertia partition of a small point set into k groups."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    best = (np.inf, None)
    for labels in itertools.product(range(k), repeat=n):
        labels = np.array(labels)
        if len(np.unique(labels)) != k:
            continue
        inertia = sum(((pts[labels == c] - pts[labels == c].mean(axis=0)) ** 2).sum()
                      for c in range(k))
        if inertia < best[0] - 1e-12:
            best = (inertia, labels)
    return best


def random_psd(rng, m, rank=None, scale=1.0):
    rank = m if rank is None else rank
    B = rng.standard_normal((m, rank)) * scale
    return B @ B.T


def random_instance(rng, v, d, n, m):
    views = [rng.standard_normal((d, n)) for _ in range(v)]
    anchors = [rng.standard_normal((d, m)) for _ in range(v)]
    Z = rng.random((m, n))
    Z /= Z.sum(axis=0, keepdims=True)
    return views, anchors, Z
