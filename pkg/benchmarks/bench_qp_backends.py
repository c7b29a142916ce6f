"""Time the compiled and pure-numpy simplex QP backends on identical batches.

Usage: python benchmarks/bench_qp_backends.py [--m 5 10 20] [--n 2000] [--repeats 3]
"""
import argparse
import time

import numpy as np

from emvgc import qp


def make_batch(m, n, d, mu, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, m))
    X = rng.standard_normal((d, n)) * 2.0
    Q = A.T @ A + mu * np.eye(m)
    F = -A.T @ X + 0.05 * np.sum(A * A, axis=0)[:, None]
    return Q, F


def best_time(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, nargs="+", default=[5, 10, 20])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--d", type=int, default=4)
    ap.add_argument("--mu", type=float, nargs="+", default=[1.0, 0.0])
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args(argv)
    if not qp.HAVE_EXTENSION:
        print("compiled backend not built; nothing to compare")
        return 1
    print(f"{'m':>4} {'mu':>5} {'python s':>10} {'cython s':>10} {'speedup':>8} {'max |dZ|':>10}")
    for m in args.m:
        for mu in args.mu:
            Q, F = make_batch(m, args.n, args.d, mu, seed=m)
            tp, Zp = best_time(lambda: qp.solve_batch(Q, F, backend="python", on_fail="ignore"),
                               args.repeats)
            tc, Zc = best_time(lambda: qp.solve_batch(Q, F, backend="cython", on_fail="ignore"),
                               args.repeats)
            diff = float(np.abs(Zp - Zc).max())
            print(f"{m:>4} {mu:>5g} {tp:>10.4f} {tc:>10.4f} {tp / tc:>8.1f} {diff:>10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
