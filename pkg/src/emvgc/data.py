"""Dataset ingestion from CSV files and synthetic multi-view Gaussian data.

File format
-----------
Each view is a plain CSV with one row per sample and one column per
feature, no header unless ``skip_header`` is set. Labels are a single
column of integers with the same number of rows.

A manifest is a JSON object::

    {
      "name": "handwritten",
      "views": ["view0.csv", "view1.csv"],
      "labels": "labels.csv",          # optional
      "normalize": "zscore",           # none | zscore | unit_norm
      "skip_header": false             # optional
    }

Relative paths resolve against the manifest's directory.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import (
    InvalidParameterError,
    MissingFileError,
    ParseError,
    RowCountMismatchError,
    ValidationError,
)
from .model import MultiViewDataset

NORMALIZATIONS = ("none", "zscore", "unit_norm")


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    view_files: tuple
    label_file: Optional[str] = None
    normalize: str = "none"
    skip_header: bool = False

    def __post_init__(self):
        if len(self.view_files) < 1:
            raise ValidationError("manifest needs at least one view file")
        object.__setattr__(self, "view_files", tuple(str(p) for p in self.view_files))
        object.__setattr__(self, "normalize", canonical_normalization(self.normalize))


def canonical_normalization(name):
    name = "unit_norm" if name == "unit" else name
    if name not in NORMALIZATIONS:
        raise InvalidParameterError(f"unknown normalization {name!r}")
    return name


def read_manifest(path) -> DatasetManifest:
    if not os.path.exists(path):
        raise MissingFileError(f"manifest not found: {path}")
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(path, exc.lineno, exc.colno, exc.msg) from exc
    base = os.path.dirname(os.path.abspath(path))

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base, p)

    if "views" not in raw or not isinstance(raw["views"], list):
        raise ValidationError(f"{path}: 'views' must be a list of file paths")
    return DatasetManifest(
        name=raw.get("name", os.path.splitext(os.path.basename(path))[0]),
        view_files=tuple(resolve(p) for p in raw["views"]),
        label_file=resolve(raw["labels"]) if raw.get("labels") else None,
        normalize=raw.get("normalize", "none"),
        skip_header=bool(raw.get("skip_header", False)),
    )


def write_manifest(manifest: DatasetManifest, path):
    base = os.path.dirname(os.path.abspath(path))

    def rel(p):
        return os.path.relpath(os.path.abspath(p), base)

    raw = {
        "name": manifest.name,
        "views": [rel(p) for p in manifest.view_files],
        "labels": rel(manifest.label_file) if manifest.label_file else None,
        "normalize": manifest.normalize,
        "skip_header": manifest.skip_header,
    }
    with open(path, "w") as fh:
        json.dump(raw, fh, indent=2)
        fh.write("\n")


def read_csv_matrix(path, skip_header=False, integer=False):
    """Rows x columns numeric table; parse failures report 1-based row/column."""
    if not os.path.exists(path):
        raise MissingFileError(f"data file not found: {path}")
    rows = []
    width = None
    conv = int if integer else float
    with open(path, newline="") as fh:
        for r, row in enumerate(csv.reader(fh), start=1):
            if skip_header and r == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(path, r, len(row), f"expected {width} columns, found {len(row)}")
            vals = []
            for c, cell in enumerate(row, start=1):
                try:
                    vals.append(conv(cell.strip()))
                except ValueError:
                    try:
                        v = float(cell.strip())
                    except ValueError:
                        v = None
                    if integer and v is not None and v == int(v):
                        vals.append(int(v))
                        continue
                    raise ParseError(path, r, c, f"cannot parse {cell!r} as a number") from None
            rows.append(vals)
    if not rows:
        raise ParseError(path, 1, 1, "file has no data rows")
    return np.array(rows, dtype=np.int64 if integer else np.float64)


def write_csv_matrix(path, M, integer=False):
    """Row-per-sample CSV; ``%.17g`` round-trips float64 exactly."""
    M = np.asarray(M)
    if M.ndim == 1:
        M = M[:, None]
    fmt = "%d" if integer else "%.17g"
    np.savetxt(path, M, delimiter=",", fmt=fmt)


def normalize_view(X, method):
    """Normalize a features x samples matrix.

    ``zscore`` standardizes every feature row (constant features become 0);
    ``unit_norm`` scales every sample column to unit Euclidean norm.
    """
    method = canonical_normalization(method)
    X = np.asarray(X, dtype=np.float64)
    if method == "none":
        return X.copy()
    if method == "zscore":
        mean = X.mean(axis=1, keepdims=True)
        C = X - mean
        std = np.sqrt((C * C).mean(axis=1, keepdims=True))
        out = np.zeros_like(C)
        nz = std[:, 0] > 0
        out[nz] = C[nz] / std[nz]
        return out
    norms = np.linalg.norm(X, axis=0, keepdims=True)
    return np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)


def load(manifest: DatasetManifest) -> MultiViewDataset:
    for path in manifest.view_files + ((manifest.label_file,) if manifest.label_file else ()):
        if not os.path.exists(path):
            raise MissingFileError(f"data file not found: {path}")
    views = []
    counts = []
    for path in manifest.view_files:
        M = read_csv_matrix(path, manifest.skip_header)
        counts.append(M.shape[0])
        views.append(M.T)
    if len(set(counts)) != 1:
        detail = ", ".join(f"{os.path.basename(p)}={c}" for p, c in zip(manifest.view_files, counts))
        raise RowCountMismatchError(f"views disagree on sample count: {detail}")
    labels = None
    if manifest.label_file:
        y = read_csv_matrix(manifest.label_file, manifest.skip_header, integer=True)
        if y.shape[1] != 1:
            raise ParseError(manifest.label_file, 1, 2, "label file must have one column")
        if y.shape[0] != counts[0]:
            raise RowCountMismatchError(
                f"{y.shape[0]} labels for {counts[0]} samples in {manifest.label_file}"
            )
        labels = y[:, 0]
    views = [normalize_view(X, manifest.normalize) for X in views]
    return MultiViewDataset(tuple(views), labels, manifest.name)


def save(dataset: MultiViewDataset, directory, name=None) -> DatasetManifest:
    """Write views (and labels) as CSVs plus a manifest; returns the manifest."""
    os.makedirs(directory, exist_ok=True)
    name = name or dataset.name
    files = []
    for p, X in enumerate(dataset.views):
        path = os.path.join(directory, f"{name}_view{p}.csv")
        write_csv_matrix(path, X.T)
        files.append(path)
    label_path = None
    if dataset.labels is not None:
        label_path = os.path.join(directory, f"{name}_labels.csv")
        write_csv_matrix(label_path, dataset.labels, integer=True)
    manifest = DatasetManifest(name, tuple(files), label_path, "none")
    write_manifest(manifest, os.path.join(directory, f"{name}.json"))
    return manifest


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 500
    k: int = 5
    views: int = 2
    dim: int = 2
    sigma: float = 0.5
    radius: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if not (self.n >= self.k >= 1):
            raise InvalidParameterError(f"need n >= k >= 1, got n={self.n}, k={self.k}")
        if self.views < 1 or self.dim < 1:
            raise InvalidParameterError("views and dim must be >= 1")
        if not (self.sigma > 0 and self.radius > 0):
            raise InvalidParameterError("sigma and radius must be > 0")


def _uniform_ball(rng, count, dim, radius):
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / dim)
    return g * r[:, None]


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> MultiViewDataset:
    """Gaussian clusters sharing one label vector across independent views.

    Cluster sizes differ by at most one. In every view the ``k`` means are
    drawn uniformly from a ball of radius ``spec.radius`` and samples are
    isotropic Gaussians with standard deviation ``spec.sigma`` around them.
    """
    rng = np.random.default_rng(spec.seed)
    sizes = np.full(spec.k, spec.n // spec.k)
    sizes[: spec.n % spec.k] += 1
    labels = np.repeat(np.arange(spec.k), sizes)
    views = []
    for _ in range(spec.views):
        means = _uniform_ball(rng, spec.k, spec.dim, spec.radius)
        pts = means[labels] + spec.sigma * rng.standard_normal((spec.n, spec.dim))
        views.append(pts.T)
    return MultiViewDataset(tuple(views), labels, "synthetic")
