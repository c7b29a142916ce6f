"""Simplex-constrained convex quadratic programs.

Solves ``min 0.5 z'Qz + f'z  s.t.  z >= 0, sum(z) = 1`` for PSD ``Q``, one
problem at a time or for a batch of linear terms sharing ``Q``.

The batch kernel is compiled (``emvgc._qp_kernel``) when available and falls
back to a vectorized numpy port otherwise. Select explicitly with the
``EMVGC_BACKEND`` environment variable (``cython`` / ``python``) or the
``backend=`` argument.
"""
from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np

from . import _qp_fallback
from .exceptions import (
    InvalidProblemError,
    NonFiniteError,
    QPConvergenceWarning,
    QPNotConvergedError,
)
from .linalg import power_iteration

try:
    from . import _qp_kernel
except ImportError:  # pragma: no cover - exercised only on pure-Python installs
    _qp_kernel = None

HAVE_EXTENSION = _qp_kernel is not None

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 1000
POLISH_EVERY = 10
# headroom over the power-iteration estimate so 1/L stays a descent step
LIPSCHITZ_SAFETY = 1.01


def _resolve_backend(backend=None):
    choice = backend or os.environ.get("EMVGC_BACKEND", "auto")
    if choice == "auto":
        return "cython" if HAVE_EXTENSION else "python"
    if choice == "cython" and not HAVE_EXTENSION:
        raise ImportError("compiled backend requested but emvgc._qp_kernel is not built")
    if choice not in ("cython", "python"):
        raise ValueError(f"unknown backend {choice!r}")
    return choice


BACKEND = _resolve_backend()


def _kernel(backend):
    return _qp_kernel if _resolve_backend(backend) == "cython" else _qp_fallback


@dataclass(frozen=True)
class SimplexQP:
    Q: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=np.float64)
        f = np.array(self.f, dtype=np.float64).reshape(-1)
        check_problem(Q, f[:, None])
        Q.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "f", f)

    @property
    def m(self) -> int:
        return self.f.shape[0]

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=np.float64)
        return float(0.5 * z @ self.Q @ z + self.f @ z)


def check_problem(Q, F):
    Q = np.asarray(Q)
    F = np.asarray(F)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise InvalidProblemError(f"Q must be square, got shape {Q.shape}")
    if F.ndim != 2 or F.shape[0] != Q.shape[0]:
        raise InvalidProblemError(f"linear terms have shape {F.shape}, expected ({Q.shape[0]}, n)")
    if Q.shape[0] < 1:
        raise InvalidProblemError("empty problem")
    if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(F))):
        raise InvalidProblemError("problem data must be finite")
    scale = max(np.abs(Q).max(), 1e-300)
    if np.abs(Q - Q.T).max() > 1e-10 * max(scale, 1.0):
        raise InvalidProblemError("Q is not symmetric")
    lo = np.linalg.eigvalsh(0.5 * (Q + Q.T))[0]
    if lo < -1e-8 * np.linalg.norm(Q, 2):
        raise InvalidProblemError(f"Q is not positive semidefinite (min eigenvalue {lo:.3e})")


def project_simplex(v, backend=None):
    """Euclidean projection of ``v`` onto the probability simplex.

    Inputs already on the simplex (nonnegative, summing to 1 within 1e-12)
    are returned unchanged, which makes the projection exactly idempotent.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a nonempty vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("cannot project a non-finite vector")
    return _kernel(backend).project_simplex_rows(np.ascontiguousarray(v[None, :]))[0]


def project_simplex_columns(V, backend=None):
    """Project every column of ``V`` onto the probability simplex."""
    V = np.asarray(V, dtype=np.float64)
    if not np.all(np.isfinite(V)):
        raise NonFiniteError("cannot project non-finite values")
    return _kernel(backend).project_simplex_rows(np.array(V.T, order="C")).T


def lipschitz(Q) -> float:
    """Step-size constant for ``Q``: a safe upper estimate of its top eigenvalue."""
    return LIPSCHITZ_SAFETY * power_iteration(Q)


def kkt_residual(Q, f, z) -> float:
    """KKT violation of ``z`` for the simplex QP ``(Q, f)``.

    With ``g = Qz + f`` and the equality multiplier ``nu`` estimated as minus
    the mean of ``g`` over the support, returns
    ``max(max(0, -min(g + nu)), |z'(g + nu)|)``.
    """
    z = np.asarray(z, dtype=np.float64)
    g = np.asarray(Q, dtype=np.float64) @ z + np.asarray(f, dtype=np.float64)
    return float(_qp_fallback.kkt_rows(z[None, :], g[None, :])[0])


def effective_tol(tol, L, F):
    """Absolute KKT tolerance per column, scaled up for badly scaled problems."""
    fmax = np.abs(F).max(axis=0) if F.size else np.zeros(F.shape[1])
    return tol * np.maximum(1.0, np.maximum(L, fmax))


def solve_batch(Q, F, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS, warm_start=None,
                on_fail="warn", backend=None, threads=1, check=True, return_info=False):
    """Solve one simplex QP per column of ``F``, all sharing ``Q``.

    Parameters
    ----------
    Q : ndarray, shape (m, m)
        Symmetric PSD quadratic term.
    F : ndarray, shape (m, n)
        Linear terms, one column per problem.
    tol : float
        KKT tolerance (see :func:`kkt_residual`); multiplied by
        ``max(1, L, |f|_inf)`` per column so it stays attainable in float64.
    max_iters : int
        Accelerated projected-gradient iteration cap per column.
    warm_start : ndarray, shape (m, n), optional
        Starting points; projected onto the simplex first. Defaults to uniform.
    on_fail : {"warn", "raise", "ignore"}
        What to do when some column misses the tolerance. The best feasible
        iterate is returned in every case ("raise" attaches it to the error).
    threads : int
        Worker threads for the compiled backend. Columns are independent, so
        the result does not depend on this value.

    Returns
    -------
    Z : ndarray, shape (m, n)
    info : dict, only when ``return_info``
        ``iterations``, ``residuals``, ``converged`` per column, and ``L``.
    """
    # private writable copies: the compiled kernel takes mutable buffers
    Q = np.array(Q, dtype=np.float64, order="C")
    F = np.asarray(F, dtype=np.float64)
    if F.ndim == 1:
        F = F[:, None]
    if check:
        check_problem(Q, F)
    m, n = F.shape
    L = lipschitz(Q)
    L = max(L, 1e-12 * (1.0 + (np.abs(F).max() if F.size else 0.0)))
    Lcol = np.full(n, L)
    tols = effective_tol(tol, L, F)
    if warm_start is None:
        Z0 = np.full((n, m), 1.0 / m)
    else:
        Z0 = np.array(np.asarray(warm_start, dtype=np.float64).reshape(m, n).T, order="C")
        if not np.all(np.isfinite(Z0)):
            raise NonFiniteError("warm start must be finite")
    Ft = np.array(F.T, order="C")
    kern = _kernel(backend)
    Z, iters, res, status = kern.solve_rows(Q, Ft, Z0, Lcol, tols, int(max_iters),
                                            POLISH_EVERY, int(threads))
    iters = np.asarray(iters, dtype=np.int64)
    res = np.asarray(res)
    status = np.asarray(status)
    # a stalled column took a non-descent plain step: the spectrum estimate was
    # too low for it, so resume it with a longer (more conservative) 1/L
    for _ in range(8):
        stalled = np.flatnonzero(status == _qp_fallback.STALLED)
        if stalled.size == 0:
            break
        Lcol[stalled] *= 4.0
        Zs, its, rs, sts = kern.solve_rows(Q, np.ascontiguousarray(Ft[stalled]),
                                           np.ascontiguousarray(Z[stalled]),
                                           np.ascontiguousarray(Lcol[stalled]),
                                           np.ascontiguousarray(tols[stalled]),
                                           int(max_iters), POLISH_EVERY, int(threads))
        Z[stalled] = Zs
        iters[stalled] += np.asarray(its)
        res[stalled] = rs
        status[stalled] = sts
    Z = np.asarray(Z).T.copy()
    converged = np.asarray(status) == _qp_fallback.CONVERGED
    if not converged.all():
        bad = np.flatnonzero(~converged)
        if on_fail == "raise":
            raise QPNotConvergedError(bad, res[bad], solution=Z)
        if on_fail == "warn":
            warnings.warn(str(QPNotConvergedError(bad, res[bad])), QPConvergenceWarning,
                          stacklevel=2)
    if return_info:
        return Z, {"iterations": iters, "residuals": res, "converged": converged,
                   "L": L, "tol": tols}
    return Z


def solve(problem, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS, warm_start=None,
          on_fail="warn", backend=None, return_info=False):
    """Solve a single :class:`SimplexQP`; same options as :func:`solve_batch`."""
    if not isinstance(problem, SimplexQP):
        problem = SimplexQP(*problem)
    ws = None if warm_start is None else np.asarray(warm_start, dtype=np.float64)[:, None]
    out = solve_batch(problem.Q, problem.f[:, None], tol=tol, max_iters=max_iters,
                      warm_start=ws, on_fail=on_fail, backend=backend, check=False,
                      return_info=return_info)
    if return_info:
        Z, info = out
        return Z[:, 0], {k: (v[0] if isinstance(v, np.ndarray) and v.ndim else v)
                         for k, v in info.items()}
    return out[:, 0]
