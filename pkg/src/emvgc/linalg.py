"""Dense float64 matrix helpers used by the optimizer and the embedding."""
import numpy as np
import scipy.linalg as sla


def sym_solve(G, B):
    """Solve ``G X = B`` for symmetric positive (semi)definite ``G``.

    Tries a Cholesky factorization first and falls back to a symmetric
    indefinite (LDL^T) solve. Raises ``numpy.linalg.LinAlgError`` when ``G``
    is exactly singular.
    """
    G = np.asarray(G, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    try:
        c = sla.cho_factor(G, lower=True, check_finite=False)
        return sla.cho_solve(c, B, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    try:
        return sla.solve(G, B, assume_a="sym", check_finite=False)
    except sla.LinAlgWarning as exc:  # pragma: no cover - only under warnings-as-errors
        raise np.linalg.LinAlgError(str(exc)) from exc


def economy_svd(X):
    """Thin SVD ``X = U @ diag(s) @ Vt`` with singular values descending."""
    U, s, Vt = np.linalg.svd(np.asarray(X, dtype=np.float64), full_matrices=False)
    return U, s, Vt


def power_iteration(Q, iters=200, rtol=1e-12):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration.

    Returns the Rayleigh quotient of the final iterate. The start vector is
    fixed so the estimate is deterministic.
    """
    Q = np.asarray(Q, dtype=np.float64)
    m = Q.shape[0]
    if m == 0:
        return 0.0
    x = 1.0 + 0.01 * np.arange(m, dtype=np.float64) / max(m, 1)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(iters):
        y = Q @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        new = float(x @ y)
        x = y / ny
        if abs(new - lam) <= rtol * max(abs(new), 1e-300):
            lam = new
            break
        lam = new
    return float(x @ (Q @ x))
