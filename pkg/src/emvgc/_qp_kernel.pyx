# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for simplex projection and the batched simplex QP.

Mirrors ``emvgc._qp_fallback`` step for step; see that module for the
algorithm description.
"""
import numpy as np

cimport cython
from cython.parallel cimport parallel, prange
from libc.math cimport fabs, sqrt
from libc.stdlib cimport free, malloc, qsort
from scipy.linalg.cython_lapack cimport dsyev

cdef enum:
    ST_RUNNING = 0
    ST_CONVERGED = 1
    ST_MAXITER = 2
    ST_STALLED = 3


cdef int _cmp_desc(const void* a, const void* b) noexcept nogil:
    cdef double x = (<const double*>a)[0]
    cdef double y = (<const double*>b)[0]
    if x > y:
        return -1
    if x < y:
        return 1
    return 0


cdef void _project(const double* v, double* out, double* buf, int m) noexcept nogil:
    """Euclidean projection of v onto the probability simplex (sort based)."""
    cdef int j, rho = 0
    cdef double s = 0.0, theta, vmin = v[0], cssv = 0.0
    for j in range(m):
        s += v[j]
        if v[j] < vmin:
            vmin = v[j]
    if vmin >= 0.0 and fabs(s - 1.0) <= 1e-12:
        for j in range(m):
            out[j] = v[j]
        return
    for j in range(m):
        buf[j] = v[j]
    qsort(buf, m, sizeof(double), _cmp_desc)
    theta = buf[0] - 1.0
    for j in range(m):
        cssv += buf[j]
        if buf[j] - (cssv - 1.0) / (j + 1) > 0.0:
            rho = j + 1
            theta = (cssv - 1.0) / (j + 1)
    s = 0.0
    for j in range(m):
        out[j] = v[j] - theta if v[j] > theta else 0.0
        s += out[j]
    # cancellation in v - theta for large |v|; one rescale restores the sum
    for j in range(m):
        out[j] = out[j] / s


cdef void _matvec_add(const double* Q, const double* x, const double* f,
                      double* out, int m) noexcept nogil:
    cdef int i, j
    cdef double acc
    for i in range(m):
        acc = f[i]
        for j in range(m):
            acc = acc + Q[i * m + j] * x[j]
        out[i] = acc


cdef double _objective(const double* z, const double* g, const double* f, int m) noexcept nogil:
    # 0.5 z'Qz + f'z = 0.5 z'(g + f) with g = Qz + f
    cdef int j
    cdef double acc = 0.0
    for j in range(m):
        acc = acc + z[j] * (g[j] + f[j])
    return 0.5 * acc


cdef double _kkt(const double* z, const double* g, int m) noexcept nogil:
    cdef int j, cnt = 0
    cdef double nu = 0.0, r, rmin = 0.0, comp = 0.0
    for j in range(m):
        if z[j] > 0.0:
            nu = nu - g[j]
            cnt += 1
    if cnt == 0:
        return 1e300
    nu = nu / cnt
    for j in range(m):
        r = g[j] + nu
        if r < rmin:
            rmin = r
        comp = comp + z[j] * r
    if -rmin > fabs(comp):
        return -rmin
    return fabs(comp)


cdef int _polish(const double* Q, const double* f, const double* z, double* zp,
                 double* gp, double* K, double* rhs, double* x, double* ev,
                 double* lw, int lwork, int* idx, int m) noexcept nogil:
    """Active-set refinement from z.

    Each round solves the equality-constrained KKT system on the current
    support by eigendecomposition, dropping eigenvalues below 1e-12 of the
    largest. A consistent system gives the face minimizer: move toward it,
    stopping at the first coordinate that would turn negative. Otherwise the
    least-squares residual is a null-space direction along which the
    objective falls linearly: follow it to the boundary. The blocking
    coordinate leaves the support and the round repeats. Writes the result
    into zp (gp = Q zp + f) and returns 1 if a candidate was produced.
    """
    cdef int s, a, b, c, n1, info = 0, j, rnd, block
    cdef double tot = 0.0, tmin, ratio, d, lmax, coef, rnorm, bnorm
    cdef char jobz = b'V', uplo = b'L'
    for j in range(m):
        zp[j] = z[j]
    for rnd in range(m):
        s = 0
        for j in range(m):
            if zp[j] > 0.0:
                idx[s] = j
                s += 1
        if s == 0:
            return 0
        n1 = s + 1
        # column-major K (symmetric, so layout only matters for clarity)
        for b in range(s):
            for a in range(s):
                K[b * n1 + a] = Q[idx[a] * m + idx[b]]
            K[b * n1 + s] = 1.0
            K[s * n1 + b] = 1.0
            rhs[b] = -f[idx[b]]
        K[s * n1 + s] = 0.0
        rhs[s] = 1.0
        dsyev(&jobz, &uplo, &n1, K, &n1, ev, lw, &lwork, &info)
        if info != 0:
            break
        lmax = 0.0
        for c in range(n1):
            if fabs(ev[c]) > lmax:
                lmax = fabs(ev[c])
        # x = pseudo-inverse solution; rhs becomes the residual b - K x
        for a in range(n1):
            x[a] = 0.0
        for c in range(n1):
            if fabs(ev[c]) > 1e-12 * lmax:
                coef = 0.0
                for a in range(n1):
                    coef = coef + K[c * n1 + a] * rhs[a]
                for a in range(n1):
                    rhs[a] = rhs[a] - coef * K[c * n1 + a]
                coef = coef / ev[c]
                for a in range(n1):
                    x[a] = x[a] + coef * K[c * n1 + a]
        rnorm = 0.0
        bnorm = 1.0
        for a in range(s):
            rnorm = rnorm + rhs[a] * rhs[a]
            bnorm = bnorm + f[idx[a]] * f[idx[a]]
        tmin = 1.0
        block = -1
        if rnorm > 1e-18 * bnorm:
            # inconsistent: descend along the residual to the boundary
            tmin = 1e300
            for a in range(s):
                if rhs[a] < 0.0:
                    ratio = zp[idx[a]] / (-rhs[a])
                    if ratio < tmin:
                        tmin = ratio
                        block = a
            if block < 0:
                break
            for a in range(s):
                zp[idx[a]] = zp[idx[a]] + tmin * rhs[a]
                if zp[idx[a]] < 0.0:
                    zp[idx[a]] = 0.0
            zp[idx[block]] = 0.0
            continue
        for a in range(s):
            if x[a] < 0.0:
                d = zp[idx[a]] - x[a]
                ratio = zp[idx[a]] / d
                if ratio < tmin:
                    tmin = ratio
                    block = a
        for a in range(s):
            zp[idx[a]] = zp[idx[a]] + tmin * (x[a] - zp[idx[a]])
            if zp[idx[a]] < 0.0:
                zp[idx[a]] = 0.0
        if block < 0:
            break
        zp[idx[block]] = 0.0
    for j in range(m):
        tot = tot + zp[j]
    if tot <= 0.0:
        return 0
    for j in range(m):
        zp[j] = zp[j] / tot
    _matvec_add(Q, zp, f, gp, m)
    return 1


cdef int _adopt_polish(const double* Q, const double* f, double* z, double* gz,
                       double* y, double* gy, double* fz, double* res, double* t,
                       double tol, double* zp, double* gp, double* K, double* rhs,
                       double* x, double* ev, double* lw, int lwork, int* idx,
                       int m) noexcept nogil:
    """Replace the iterate by the refined point when it is no worse.

    Momentum restarts at the new point. Returns 1 when it certifies tol.
    """
    cdef int j
    cdef double fp, rp
    if not _polish(Q, f, z, zp, gp, K, rhs, x, ev, lw, lwork, idx, m):
        return 0
    fp = _objective(zp, gp, f, m)
    if fp > fz[0] + 1e-13 * (1.0 + fabs(fz[0])):
        return 0
    rp = _kkt(zp, gp, m)
    for j in range(m):
        z[j] = zp[j]
        gz[j] = gp[j]
        y[j] = zp[j]
        gy[j] = gp[j]
    fz[0] = fp
    res[0] = rp
    t[0] = 1.0
    return rp <= tol


cdef int _solve_column(const double* Q, const double* f, double* z, double L,
                       double tol, int max_iters, int polish_every,
                       double* work, int* iwork, int m,
                       int* iters_out, double* res_out) noexcept nogil:
    cdef double* zn = work
    cdef double* y = work + m
    cdef double* gz = work + 2 * m
    cdef double* gn = work + 3 * m
    cdef double* gy = work + 4 * m
    cdef double* buf = work + 5 * m
    cdef double* zp = work + 6 * m
    cdef double* gp = work + 7 * m
    cdef double* rhs = work + 8 * m
    cdef double* x = work + 9 * m + 1
    cdef double* ev = work + 10 * m + 2
    cdef double* lw = work + 11 * m + 3
    cdef int lwork = 4 * (m + 1)
    cdef double* K = work + 15 * m + 7
    cdef int* idx = iwork
    cdef int it, j, status = ST_RUNNING
    cdef double t = 1.0, tn, beta, fz, fn, res, invL = 1.0 / L

    _project(z, zn, buf, m)
    for j in range(m):
        z[j] = zn[j]
    _matvec_add(Q, z, f, gz, m)
    fz = _objective(z, gz, f, m)
    res = _kkt(z, gz, m)
    for j in range(m):
        y[j] = z[j]
        gy[j] = gz[j]
    it = 0
    if res <= tol:
        status = ST_CONVERGED
    while status == ST_RUNNING and it < max_iters:
        it += 1
        for j in range(m):
            buf[j] = y[j] - gy[j] * invL
        _project(buf, zn, gp, m)
        _matvec_add(Q, zn, f, gn, m)
        fn = _objective(zn, gn, f, m)
        if fn > fz:
            if t == 1.0:
                status = ST_STALLED
                break
            t = 1.0
            for j in range(m):
                y[j] = z[j]
                gy[j] = gz[j]
            continue
        tn = 0.5 * (1.0 + sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / tn
        for j in range(m):
            y[j] = zn[j] + beta * (zn[j] - z[j])
            gy[j] = gn[j] + beta * (gn[j] - gz[j])
            z[j] = zn[j]
            gz[j] = gn[j]
        fz = fn
        t = tn
        res = _kkt(z, gz, m)
        if res <= tol:
            status = ST_CONVERGED
            break
        if polish_every > 0 and it % polish_every == 0:
            if _adopt_polish(Q, f, z, gz, y, gy, &fz, &res, &t, tol,
                             zp, gp, K, rhs, x, ev, lw, lwork, idx, m):
                status = ST_CONVERGED
                break
    if status != ST_CONVERGED:
        if _adopt_polish(Q, f, z, gz, y, gy, &fz, &res, &t, tol,
                         zp, gp, K, rhs, x, ev, lw, lwork, idx, m):
            status = ST_CONVERGED
        elif status == ST_RUNNING:
            status = ST_MAXITER
    iters_out[0] = it
    res_out[0] = res
    return status


def project_simplex_rows(double[:, ::1] V):
    """Project every row of V onto the probability simplex."""
    cdef Py_ssize_t n = V.shape[0], i
    cdef int m = <int>V.shape[1]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] O = out
    cdef double* buf = <double*>malloc(m * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                _project(&V[i, 0], &O[i, 0], buf, m)
    finally:
        free(buf)
    return out


def solve_rows(double[:, ::1] Q, double[:, ::1] F, double[:, ::1] Z0,
               double[::1] L, double[::1] tol, int max_iters,
               int polish_every=10, int num_threads=1):
    """Solve min 0.5 z'Qz + f'z over the simplex for every row f of F.

    Returns (Z, iterations, residuals, status); row i of Z is the solution
    for row i of F started from row i of Z0. status: 1 converged,
    2 iteration cap reached, 3 stalled (step too long for the given L).
    """
    cdef Py_ssize_t n = F.shape[0], i
    cdef int m = <int>Q.shape[0]
    cdef int wlen = 15 * m + 7 + (m + 1) * (m + 1)
    cdef int iwlen = m + 1
    Z = np.array(Z0, dtype=np.float64, order="C", copy=True)
    iters = np.zeros(n, dtype=np.intc)
    res = np.zeros(n, dtype=np.float64)
    status = np.zeros(n, dtype=np.intc)
    cdef double[:, ::1] Zv = Z
    cdef int[::1] itv = iters
    cdef double[::1] rv = res
    cdef int[::1] sv = status
    cdef double* work
    cdef int* iwork
    if num_threads < 1:
        num_threads = 1
    with nogil, parallel(num_threads=num_threads):
        work = <double*>malloc(wlen * sizeof(double))
        iwork = <int*>malloc(iwlen * sizeof(int))
        for i in prange(n, schedule="static"):
            sv[i] = _solve_column(&Q[0, 0], &F[i, 0], &Zv[i, 0], L[i], tol[i],
                                  max_iters, polish_every, work, iwork, m,
                                  &itv[i], &rv[i])
        free(work)
        free(iwork)
    return Z, iters, res, status
