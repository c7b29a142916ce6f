"""Command-line harness: ``emvgc {run,grid,ablate,bench,synth}``.

Every command prints a table to stdout and, with ``--out``, writes a JSON
report whose keys are stable across versions (see README).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import data, experiments
from .exceptions import EMVGCError
from .model import HyperParams
from .pipeline import ARMS


def _add_data_args(p, manifest_required=False):
    src = p.add_argument_group("data")
    src.add_argument("--manifest", help="JSON dataset manifest (views, labels, normalize)")
    if not manifest_required:
        src.add_argument("--synthetic", action="store_true",
                         help="use the synthetic Gaussian multi-view dataset")
    src.add_argument("--normalize", choices=["none", "zscore", "unit", "unit_norm"], default=None,
                     help="override the manifest normalization")
    syn = p.add_argument_group("synthetic data")
    syn.add_argument("--n", type=int, default=500)
    syn.add_argument("--true-k", type=int, default=5, help="synthetic cluster count")
    syn.add_argument("--views", type=int, default=2)
    syn.add_argument("--dim", type=int, default=2)
    syn.add_argument("--sigma", type=float, default=data.SyntheticSpec.sigma)
    syn.add_argument("--radius", type=float, default=data.SyntheticSpec.radius)
    syn.add_argument("--synth-seed", type=int, default=0)


def _add_param_args(p):
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--lambda", dest="lam", type=float, default=0.1)
    g.add_argument("--mu", type=float, default=1.0)
    g.add_argument("--anchors", type=int, default=None, help="anchor count m (default: clusters)")
    g.add_argument("--clusters", type=int, default=None, help="cluster count k (default: classes)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--max-iters", type=int, default=50)
    g.add_argument("--tol", type=float, default=1e-6, help="relative objective change to stop")
    g.add_argument("--qp-tol", type=float, default=1e-8)
    g.add_argument("--anchor-init", choices=["sample", "kmeans"], default="sample")
    g.add_argument("--kmeans-restarts", type=int, default=10)
    g.add_argument("--embedding-scale", choices=["none", "sigma", "sqrt_sigma"], default="none")
    g.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="write the JSON report here")


def _synth_spec(args, seed_offset=0):
    return data.SyntheticSpec(n=args.n, k=args.true_k, views=args.views, dim=args.dim,
                              sigma=args.sigma, radius=args.radius,
                              seed=args.synth_seed + seed_offset)


def _load(args, seed_offset=0):
    if getattr(args, "manifest", None):
        manifest = data.read_manifest(args.manifest)
        if args.normalize:
            manifest = data.DatasetManifest(manifest.name, manifest.view_files,
                                            manifest.label_file, args.normalize,
                                            manifest.skip_header)
        return data.load(manifest)
    if getattr(args, "synthetic", False):
        ds = data.generate_synthetic(_synth_spec(args, seed_offset))
        if args.normalize:
            ds = type(ds)(tuple(data.normalize_view(X, args.normalize) for X in ds.views),
                          ds.labels, ds.name)
        return ds
    raise EMVGCError("give --manifest PATH or --synthetic")


def _params(args, dataset, **overrides):
    k = args.clusters or dataset.n_classes
    if k is None:
        raise EMVGCError("--clusters is required when the dataset has no labels")
    m = args.anchors or k
    kw = dict(lam=args.lam, mu=args.mu, m=m, k=k, max_outer_iters=args.max_iters,
              rel_tol=args.tol, qp_tol=args.qp_tol, seed=args.seed,
              anchor_init=args.anchor_init, kmeans_restarts=args.kmeans_restarts,
              embedding_scale=args.embedding_scale, threads=args.threads)
    kw.update(overrides)
    return HyperParams(**kw)


def _write(path, payload):
    if not path:
        return
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt_metrics(m):
    if not m:
        return "-"
    return f"ACC {m['acc']:.4f}  NMI {m['nmi']:.4f}  F {m['fscore']:.4f}"


def cmd_run(args):
    ds = _load(args)
    params = _params(args, ds)
    out, report, state = experiments.run_single(ds, params)
    print(f"dataset {ds.name}: n={ds.n} views={ds.n_views} dims={list(ds.dims)}")
    print(f"lambda={params.lam:g} mu={params.mu:g} m={params.m} k={params.k} seed={params.seed}")
    print(f"iterations {report.iterations}  converged {state.converged}  "
          f"objective {report.objective_trace[-1]:.6g}")
    print("metrics   " + _fmt_metrics(report.metrics))
    print("timings   " + "  ".join(f"{k} {v:.3f}s" for k, v in report.timings.items()))
    if args.save_labels:
        data.write_csv_matrix(args.save_labels, report.labels, integer=True)
    _write(args.out, out)
    return 0


def cmd_grid(args):
    ds = _load(args)
    base = _params(args, ds)
    grid = experiments.GridSpec(
        lambdas=tuple(args.lambdas), mus=tuple(args.mus),
        anchor_multipliers=tuple(args.anchor_multipliers), repeats=args.repeats)

    def progress(cell):
        if cell["status"] == "ok":
            print(f"[{cell['cell']:3d}] lambda={cell['lambda']:<7g} mu={cell['mu']:<7g} "
                  f"m={cell['m']:<4d} ACC {cell['acc_mean']:.4f}±{cell['acc_std']:.4f}  "
                  f"NMI {cell['nmi_mean']:.4f}±{cell['nmi_std']:.4f}  "
                  f"F {cell['fscore_mean']:.4f}±{cell['fscore_std']:.4f}", flush=True)
        else:
            print(f"[{cell['cell']:3d}] lambda={cell['lambda']:<7g} mu={cell['mu']:<7g} "
                  f"m={cell['m']:<4d} FAILED {cell['error']}", flush=True)

    summary, runs = experiments.run_grid(ds, base, grid, progress=progress)
    if summary["best_cell"] is not None:
        b = summary["cells"][summary["best_cell"]]
        print(f"best cell {b['cell']}: lambda={b['lambda']:g} mu={b['mu']:g} m={b['m']} "
              f"ACC {b['acc_mean']:.4f}±{b['acc_std']:.4f}")
    if args.out:
        runs_path = os.path.splitext(args.out)[0] + ".runs.json"
        summary["runs_file"] = os.path.basename(runs_path)
        _write(args.out, summary)
        _write(runs_path, {"version": experiments.REPORT_VERSION, "runs": runs})
    return 0


def cmd_ablate(args):
    results = []
    for r in range(args.repeats):
        offset = r if args.synthetic else 0
        ds = _load(args, seed_offset=offset)
        params = _params(args, ds, seed=args.seed + r)
        arms, _ = experiments.run_ablation(ds, params)
        results.append({"seed": params.seed, "dataset_seed": args.synth_seed + offset
                        if args.synthetic else None, "arms": arms})
    print(f"{'arm':<9} {'ACC':>8} {'NMI':>8} {'Fscore':>8}")
    table = {}
    for arm in ARMS:
        ok = [res["arms"][arm]["metrics"] for res in results
              if res["arms"][arm]["status"] == "ok" and res["arms"][arm]["metrics"]]
        if not ok:
            print(f"{arm:<9} {'failed':>8}")
            table[arm] = None
            continue
        row = {k: float(np.mean([m[k] for m in ok])) for k in ("acc", "nmi", "fscore")}
        table[arm] = row
        print(f"{arm:<9} {row['acc']:8.4f} {row['nmi']:8.4f} {row['fscore']:8.4f}")
    _write(args.out, {"version": experiments.REPORT_VERSION, "command": "ablate",
                      "repeats": args.repeats, "mean": table, "runs": results})
    return 0


def cmd_bench(args):
    out = experiments.run_bench(sizes=tuple(args.sizes), m=args.anchors, k=args.clusters,
                                views=args.views, dim=args.dim, iters=args.iters,
                                seed=args.seed, repeats=args.repeats, backend=args.backend)
    print(f"backend {out['backend']}  m={args.anchors} k={args.clusters} "
          f"views={args.views} dim={args.dim} iters={args.iters}")
    for row in out["results"]:
        print(f"n={row['n']:<8d} {row['seconds']:.4f}s")
    if "slope" in out:
        print(f"log-log slope {out['slope']:.3f}")
    _write(args.out, out)
    return 0


def cmd_synth(args):
    spec = _synth_spec(args)
    ds = data.generate_synthetic(spec)
    params = _params(args, ds)
    summary = experiments.run_synth(spec, params, args.outdir, quantile=args.edge_quantile)
    print(f"{'arm':<9} {'ACC':>8} {'NMI':>8} {'Fscore':>8}")
    for arm, m in summary["arms"].items():
        if m and "acc" in m:
            print(f"{arm:<9} {m['acc']:8.4f} {m['nmi']:8.4f} {m['fscore']:8.4f}")
        else:
            print(f"{arm:<9} failed")
    print(f"files written to {args.outdir}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="emvgc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="fit one configuration and report metrics")
    _add_data_args(p)
    _add_param_args(p)
    p.add_argument("--save-labels", help="write predicted labels as a one-column CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("grid", help="grid search over lambda, mu and anchor count")
    _add_data_args(p)
    _add_param_args(p)
    p.add_argument("--lambdas", type=float, nargs="+", default=list(experiments.GridSpec.lambdas))
    p.add_argument("--mus", type=float, nargs="+", default=list(experiments.GridSpec.mus))
    p.add_argument("--anchor-multipliers", type=int, nargs="+",
                   default=list(experiments.GridSpec.anchor_multipliers))
    p.add_argument("--repeats", type=int, default=experiments.GridSpec.repeats)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("ablate", help="local / global / fixed / learned comparison")
    _add_data_args(p)
    _add_param_args(p)
    p.add_argument("--repeats", type=int, default=1,
                   help="seeds to average over (synthetic data is redrawn per seed)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="fit time versus sample count")
    p.add_argument("--sizes", type=int, nargs="+", default=[1000, 2000, 4000, 8000])
    p.add_argument("--anchors", type=int, default=20)
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--views", type=int, default=2)
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--backend", choices=["auto", "cython", "python"], default="auto")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("synth", help="synthetic experiment with plot-data output")
    _add_data_args(p)
    _add_param_args(p)
    p.add_argument("--outdir", required=True)
    p.add_argument("--edge-quantile", type=float, default=experiments.EDGE_QUANTILE)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EMVGCError, OSError, ValueError) as exc:
        print(f"emvgc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
