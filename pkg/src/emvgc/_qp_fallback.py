"""Pure-numpy batched simplex QP, used when the compiled kernel is absent.

Every column (stored here as a row of ``F``) runs accelerated projected
gradient with step ``1/L``:

* gradient step from the extrapolated point, then exact projection;
* if the objective rises, momentum is reset and the step is retried from
  the last accepted iterate (a plain projected-gradient step, which cannot
  rise when ``L`` bounds the spectrum; if it still does the column is
  reported as stalled);
* every ``polish_every`` iterations, an active-set refinement from the
  current support (see :func:`_polish`) replaces the iterate when it does not
  raise the objective; the column is done if it certifies the tolerance.

The rows advance in lockstep; per-row state lives in masks.
"""
import numpy as np
import scipy.linalg

CONVERGED, MAXITER, STALLED = 1, 2, 3


def project_simplex_rows(V):
    V = np.asarray(V, dtype=np.float64)
    n, m = V.shape
    out = np.empty_like(V)
    if n == 0:
        return out
    feasible = (V.min(axis=1) >= 0.0) & (np.abs(V.sum(axis=1) - 1.0) <= 1e-12)
    out[feasible] = V[feasible]
    rest = ~feasible
    if rest.any():
        W = V[rest]
        U = -np.sort(-W, axis=1)
        cssv = np.cumsum(U, axis=1) - 1.0
        ind = np.arange(1, m + 1, dtype=np.float64)
        cond = U - cssv / ind > 0.0
        rho = m - np.argmax(cond[:, ::-1], axis=1)
        theta = cssv[np.arange(W.shape[0]), rho - 1] / rho
        P = np.where(W > theta[:, None], W - theta[:, None], 0.0)
        # cancellation in v - theta for large |v|; one rescale restores the sum
        out[rest] = P / P.sum(axis=1, keepdims=True)
    return out


def objective_rows(Z, G, F):
    return 0.5 * np.einsum("ij,ij->i", Z, G + F)


def kkt_rows(Z, G):
    S = Z > 0.0
    cnt = S.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        nu = -np.where(S, G, 0.0).sum(axis=1) / cnt
    R = G + nu[:, None]
    dual = np.maximum(0.0, -R.min(axis=1))
    comp = np.abs(np.einsum("ij,ij->i", Z, R))
    out = np.maximum(dual, comp)
    out[cnt == 0] = 1e300
    return out


def _polish(Q, F, Z):
    """Active-set refinement of every row, grouped by support pattern.

    Each round solves the equality-constrained KKT system on the current
    support by eigendecomposition, dropping eigenvalues below 1e-12 of the
    largest. A consistent system gives the face minimizer: move toward it,
    stopping at the first coordinate that would turn negative. Otherwise the
    least-squares residual is a null-space direction along which the
    objective falls linearly: follow it to the boundary. The blocking
    coordinate leaves the support and the row goes another round.
    """
    n, m = Z.shape
    Zp = Z.copy()
    ok = np.ones(n, dtype=bool)
    active = np.arange(n)
    for _ in range(m):
        if active.size == 0:
            break
        S = Zp[active] > 0.0
        patterns, inverse = np.unique(S, axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        again = []
        for g, pat in enumerate(patterns):
            rows = active[inverse == g]
            idx = np.flatnonzero(pat)
            s = idx.size
            if s == 0:
                ok[rows] = False
                continue
            K = np.zeros((s + 1, s + 1))
            K[:s, :s] = Q[np.ix_(idx, idx)]
            K[:s, s] = 1.0
            K[s, :s] = 1.0
            rhs = np.empty((s + 1, rows.size))
            rhs[:s] = -F[rows][:, idx].T
            rhs[s] = 1.0
            try:
                ev, V = scipy.linalg.eigh(K, driver="ev", check_finite=False)
            except (np.linalg.LinAlgError, ValueError):
                continue
            keep = np.abs(ev) > 1e-12 * np.abs(ev).max()
            Vk = V[:, keep]
            coef = Vk.T @ rhs
            W = (Vk @ (coef / ev[keep, None]))[:s].T
            R = (rhs - Vk @ coef)[:s].T
            cur = Zp[rows][:, idx]
            bnorm = 1.0 + np.einsum("ij,ij->i", rhs[:s].T, rhs[:s].T)
            desc = np.einsum("ij,ij->i", R, R) > 1e-18 * bnorm
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(W < 0.0, cur / (cur - W), np.inf)
                ratio_d = np.where(R < 0.0, cur / -R, np.inf)
            ratio = np.where(desc[:, None], ratio_d, ratio)
            block = np.argmin(ratio, axis=1)
            tmin = ratio[np.arange(rows.size), block]
            step = np.where(desc[:, None], R, W - cur)
            tmin = np.where(desc, tmin, np.minimum(1.0, tmin))
            stuck = desc & ~np.isfinite(tmin)
            tmin[stuck] = 0.0
            new = np.maximum(cur + tmin[:, None] * step, 0.0)
            blocked = ((tmin < 1.0) | desc) & ~stuck
            new[np.flatnonzero(blocked), block[blocked]] = 0.0
            Zp[rows[:, None], idx[None, :]] = new
            again.append(rows[blocked])
        active = np.concatenate(again) if again else np.empty(0, dtype=np.int64)
    tot = Zp.sum(axis=1)
    ok &= tot > 0.0
    Zp[ok] /= tot[ok, None]
    return Zp, ok


def _try_polish(Q, F, rows, Z, G, Y, GY, T, fval, tol, status, res):
    """Adopt refined points that are no worse; momentum restarts there."""
    if rows.size == 0:
        return
    Zp, ok = _polish(Q, F[rows], Z[rows])
    if not ok.any():
        return
    r = rows[ok]
    Zc = Zp[ok]
    Gc = Zc @ Q + F[r]
    fc = objective_rows(Zc, Gc, F[r])
    kc = kkt_rows(Zc, Gc)
    take = fc <= fval[r] + 1e-13 * (1.0 + np.abs(fval[r]))
    r, Zc, Gc = r[take], Zc[take], Gc[take]
    Z[r] = Zc
    G[r] = Gc
    Y[r] = Zc
    GY[r] = Gc
    T[r] = 1.0
    fval[r] = fc[take]
    res[r] = kc[take]
    status[r[kc[take] <= tol[r]]] = CONVERGED


def solve_rows(Q, F, Z0, L, tol, max_iters, polish_every=10, num_threads=1):
    """Same contract as ``emvgc._qp_kernel.solve_rows``."""
    Q = np.ascontiguousarray(Q, dtype=np.float64)
    F = np.ascontiguousarray(F, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    tol = np.asarray(tol, dtype=np.float64)
    n, m = F.shape
    Z = project_simplex_rows(Z0)
    G = Z @ Q + F
    fval = objective_rows(Z, G, F)
    res = kkt_rows(Z, G)
    Y = Z.copy()
    GY = G.copy()
    T = np.ones(n)
    iters = np.zeros(n, dtype=np.intc)
    status = np.zeros(n, dtype=np.intc)
    status[res <= tol] = CONVERGED
    accepted = np.zeros(n, dtype=np.int64)

    for it in range(1, max_iters + 1):
        a = np.flatnonzero(status == 0)
        if a.size == 0:
            break
        iters[a] = it
        Zn = project_simplex_rows(Y[a] - GY[a] / L[a, None])
        Gn = Zn @ Q + F[a]
        fn = objective_rows(Zn, Gn, F[a])
        up = fn > fval[a]

        r = a[up]
        stalled = r[T[r] == 1.0]
        status[stalled] = STALLED
        T[r] = 1.0
        Y[r] = Z[r]
        GY[r] = G[r]

        keep = ~up
        c = a[keep]
        Zc, Gc = Zn[keep], Gn[keep]
        Tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * T[c] ** 2))
        beta = ((T[c] - 1.0) / Tn)[:, None]
        Y[c] = Zc + beta * (Zc - Z[c])
        GY[c] = Gc + beta * (Gc - G[c])
        Z[c] = Zc
        G[c] = Gc
        fval[c] = fn[keep]
        T[c] = Tn
        res[c] = kkt_rows(Zc, Gc)
        status[c[res[c] <= tol[c]]] = CONVERGED
        accepted[c] += 1
        if polish_every > 0 and it % polish_every == 0:
            cand = c[status[c] == 0]
            _try_polish(Q, F, cand, Z, G, Y, GY, T, fval, tol, status, res)

    rest = np.flatnonzero(status != CONVERGED)
    _try_polish(Q, F, rest, Z, G, Y, GY, T, fval, tol, status, res)
    status[status == 0] = MAXITER
    return Z, iters, res, status
