"""Experiment drivers behind the command-line interface.

Every driver returns a plain dict (JSON-serializable) and never prints;
formatting lives in :mod:`emvgc.cli`.
"""
from __future__ import annotations

import itertools
import os
import time
import traceback
from dataclasses import asdict, dataclass

import numpy as np

from . import data, optimizer, qp
from .exceptions import InvalidParameterError
from .metrics import evaluate
from .model import HyperParams
from .pipeline import ARMS, fit_arm, label_state, run

REPORT_VERSION = 1


@dataclass(frozen=True)
class GridSpec:
    lambdas: tuple = (1e-3, 1e-2, 1e-1, 1.0)
    mus: tuple = (0.0, 1e-4, 1.0, 1e4)
    anchor_multipliers: tuple = (1, 2, 5)
    repeats: int = 10

    def __post_init__(self):
        if not (self.lambdas and self.mus and self.anchor_multipliers):
            raise InvalidParameterError("grid lists must be nonempty")
        if self.repeats < 1:
            raise InvalidParameterError("repeats must be >= 1")
        for lam in self.lambdas:
            if not (0.0 < lam <= 1.0):
                raise InvalidParameterError(f"grid lambda {lam} outside (0, 1]")
        for mult in self.anchor_multipliers:
            if mult < 1:
                raise InvalidParameterError("anchor multipliers must be >= 1")

    @property
    def cells(self):
        return list(itertools.product(self.lambdas, self.mus, self.anchor_multipliers))


def dataset_info(dataset):
    return {"name": dataset.name, "n": dataset.n, "views": dataset.n_views,
            "dims": list(dataset.dims), "n_classes": dataset.n_classes}


def run_single(dataset, params, arm="learned"):
    t0 = time.perf_counter()
    report, state = run(dataset, params, arm)
    out = report.to_dict()
    out.update({
        "version": REPORT_VERSION,
        "command": "run",
        "arm": arm,
        "dataset": dataset_info(dataset),
        "converged": bool(state.converged),
        "seed": params.seed,
        "backend": qp.BACKEND,
        "wall_time": time.perf_counter() - t0,
    })
    return out, report, state


def _summary(records, key):
    vals = np.array([r["metrics"][key] for r in records], dtype=np.float64)
    return float(vals.mean()), float(vals.std())


def run_grid(dataset, base: HyperParams, grid: GridSpec, progress=None):
    """Every (lambda, mu, anchor multiplier) cell with ``grid.repeats`` k-means seeds.

    The graph is learned once per cell with ``base.seed``; repeats differ only
    in the k-means seed (``base.seed + r``). A failing cell is recorded with
    its error and the sweep continues.
    """
    if dataset.labels is None:
        raise InvalidParameterError("grid search needs ground-truth labels")
    k = base.k
    cells, runs = [], []
    for idx, (lam, mu, mult) in enumerate(grid.cells):
        cell = {"cell": idx, "lambda": lam, "mu": mu, "anchor_multiplier": mult,
                "m": int(mult * k)}
        try:
            params = base.replace(lam=lam, mu=mu, m=int(mult * k))
            params.check_against(dataset.n)
            t0 = time.perf_counter()
            state = fit_arm(dataset, params, "learned")
            fit_time = time.perf_counter() - t0
            recs = []
            for r in range(grid.repeats):
                report, _ = label_state(dataset, state, params, kmeans_seed=base.seed + r)
                recs.append({"cell": idx, "repeat": r, "kmeans_seed": base.seed + r,
                             "metrics": report.metrics})
            runs.extend(recs)
            for key in ("acc", "nmi", "fscore"):
                mean, std = _summary(recs, key)
                cell[f"{key}_mean"] = mean
                cell[f"{key}_std"] = std
            cell.update({"status": "ok", "iterations": state.iteration,
                         "final_objective": state.objective_trace[-1], "fit_time": fit_time})
        except Exception as exc:  # isolate per-cell failures
            cell.update({"status": "failed", "error": f"{type(exc).__name__}: {exc}",
                         "traceback": traceback.format_exc(limit=3)})
        cells.append(cell)
        if progress:
            progress(cell)
    ok = [c for c in cells if c["status"] == "ok"]
    best = max(ok, key=lambda c: c["acc_mean"])["cell"] if ok else None
    for c in cells:
        c["best"] = c["cell"] == best
    return {
        "version": REPORT_VERSION,
        "command": "grid",
        "dataset": dataset_info(dataset),
        "grid": asdict(grid),
        "base_config": base.as_dict(),
        "cells": cells,
        "best_cell": best,
    }, runs


def run_ablation(dataset, params: HyperParams, arms=ARMS):
    """All arms on one dataset with shared seeds.

    ``fixed`` and ``learned`` start from the same anchors (``params.anchor_init``);
    ``local`` and ``global`` share per-view k-means anchors.
    """
    params.check_against(dataset.n)
    combined_init = optimizer.init_anchors(dataset, params.m, params.anchor_init, params.seed)
    baseline_init = optimizer.init_anchors(dataset, params.m, "kmeans", params.seed)
    out = {}
    states = {}
    for arm in arms:
        anchors = combined_init if arm in ("fixed", "learned") else baseline_init
        try:
            report, state = run(dataset, params, arm, anchors=anchors)
            rec = report.to_dict()
            rec["status"] = "ok"
            out[arm] = rec
            states[arm] = (report, state)
        except Exception as exc:
            out[arm] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
    return out, states


def _bench_dataset(n, views, dim, k, seed):
    return data.generate_synthetic(data.SyntheticSpec(n=n, k=k, views=views, dim=dim, seed=seed))


def run_bench(sizes=(1000, 2000, 4000, 8000), m=20, k=5, views=2, dim=10, iters=10,
              seed=0, repeats=1, backend=None, lam=0.1, mu=1.0):
    """Wall time of a fixed-iteration fit versus sample count, plus the log-log slope."""
    rows = []
    for n in sizes:
        ds = _bench_dataset(n, views, dim, k, seed)
        params = HyperParams(lam=lam, mu=mu, m=m, k=k, max_outer_iters=iters, rel_tol=0.0,
                             seed=seed)
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            state = optimizer.fit(ds, params, backend=backend)
            times.append(time.perf_counter() - t0)
        rows.append({"n": int(n), "seconds": float(min(times)), "iterations": state.iteration})
    out = {"version": REPORT_VERSION, "command": "bench",
           "backend": qp._resolve_backend(backend),
           "config": {"m": m, "k": k, "views": views, "dim": dim, "iters": iters,
                      "seed": seed, "repeats": repeats, "lambda": lam, "mu": mu},
           "results": rows}
    if len(rows) >= 2:
        x = np.log([r["n"] for r in rows])
        y = np.log([r["seconds"] for r in rows])
        out["slope"] = float(np.polyfit(x, y, 1)[0])
        out["ratios"] = [rows[i + 1]["seconds"] / rows[i]["seconds"] for i in range(len(rows) - 1)]
    return out


EDGE_QUANTILE = 0.99


def similarity_edges(Z, quantile=EDGE_QUANTILE):
    """Sample-sample edges from ``Z'Z``: pairs i < j whose weight is positive and
    at or above the given quantile of all upper-triangle weights."""
    W = Z.T @ Z
    iu = np.triu_indices(W.shape[0], k=1)
    w = W[iu]
    cut = np.quantile(w, quantile) if w.size else 0.0
    keep = (w >= cut) & (w > 0)
    return np.column_stack([iu[0][keep], iu[1][keep], w[keep]])


def run_synth(spec: data.SyntheticSpec, params: HyperParams, outdir, quantile=EDGE_QUANTILE):
    """Generate, save, run every arm and write per-arm reports and plot data."""
    import json

    os.makedirs(outdir, exist_ok=True)
    ds = data.generate_synthetic(spec)
    manifest = data.save(ds, outdir, "synthetic")
    arms, states = run_ablation(ds, params)
    files = {"manifest": os.path.join(outdir, "synthetic.json"),
             "views": list(manifest.view_files), "labels": manifest.label_file,
             "reports": {}, "points": {}, "edges": {}}
    for arm, rec in arms.items():
        rpath = os.path.join(outdir, f"report_{arm}.json")
        with open(rpath, "w") as fh:
            json.dump(rec, fh, indent=2, sort_keys=True)
        files["reports"][arm] = rpath
        if arm not in states:
            continue
        report, state = states[arm]
        ppath = os.path.join(outdir, f"points_{arm}.csv")
        coords = np.column_stack([X.T for X in ds.views])
        header = ",".join([f"v{p}_x{j}" for p, X in enumerate(ds.views) for j in range(X.shape[0])]
                          + ["label", "pred"])
        np.savetxt(ppath, np.column_stack([coords, ds.labels, report.labels]), delimiter=",",
                   fmt="%.17g", header=header, comments="")
        files["points"][arm] = ppath
        epath = os.path.join(outdir, f"edges_{arm}.csv")
        edges = similarity_edges(state.graph.Z, quantile)
        with open(epath, "w") as fh:
            fh.write("i,j,weight\n")
            for i, j, w in edges:
                fh.write(f"{int(i)},{int(j)},{w:.17g}\n")
        files["edges"][arm] = epath
    summary = {"version": REPORT_VERSION, "command": "synth", "spec": asdict(spec),
               "config": params.as_dict(), "edge_quantile": quantile,
               "arms": {a: (r.get("metrics") if r["status"] == "ok" else r) for a, r in arms.items()},
               "files": files}
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


def metrics_of(labels, truth):
    return evaluate(labels, truth)
