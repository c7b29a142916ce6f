import json
import os

import numpy as np
import pytest

from emvgc import data
from emvgc.exceptions import (
    InvalidParameterError,
    MissingFileError,
    ParseError,
    RowCountMismatchError,
)


def _write(path, M, fmt="%.17g"):
    np.savetxt(path, np.atleast_2d(M), delimiter=",", fmt=fmt)
    return str(path)


def _manifest(tmp_path, views, labels=None, normalize="none"):
    files = [_write(tmp_path / f"v{p}.csv", V) for p, V in enumerate(views)]
    lab = _write(tmp_path / "y.csv", np.asarray(labels)[:, None], "%d") if labels is not None else None
    return data.DatasetManifest("t", tuple(files), lab, normalize)


def test_load_shape_contract(tmp_path):
    rng = np.random.default_rng(0)
    m = _manifest(tmp_path, [rng.standard_normal((500, 2)), rng.standard_normal((500, 2))],
                  labels=np.repeat(np.arange(5), 100))
    ds = data.load(m)
    assert ds.n == 500 and ds.dims == (2, 2) and ds.n_classes == 5


def test_load_row_mismatch(tmp_path):
    m = _manifest(tmp_path, [np.zeros((500, 2)), np.zeros((499, 2))])
    with pytest.raises(RowCountMismatchError):
        data.load(m)


def test_load_label_count_mismatch(tmp_path):
    m = _manifest(tmp_path, [np.zeros((5, 2))], labels=np.zeros(4, dtype=int))
    with pytest.raises(RowCountMismatchError):
        data.load(m)


def test_load_missing_file(tmp_path):
    m = data.DatasetManifest("t", (str(tmp_path / "nope.csv"),))
    with pytest.raises(MissingFileError):
        data.load(m)
    with pytest.raises(MissingFileError):
        data.read_manifest(str(tmp_path / "nope.json"))


def test_parse_error_reports_location(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("1,2\n3,abc\n")
    with pytest.raises(ParseError) as err:
        data.read_csv_matrix(str(p))
    assert (err.value.row, err.value.column) == (2, 2)
    p.write_text("1,2\n3\n")
    with pytest.raises(ParseError) as err:
        data.read_csv_matrix(str(p))
    assert err.value.row == 2


def test_skip_header(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("a,b\n1,2\n3,4\n")
    np.testing.assert_array_equal(data.read_csv_matrix(str(p), skip_header=True), [[1, 2], [3, 4]])


def test_zscore(tmp_path):
    rng = np.random.default_rng(1)
    V = rng.standard_normal((50, 3)) * [1, 5, 100] + [3, -2, 7]
    V[:, 1] = 4.0
    ds = data.load(_manifest(tmp_path, [V], normalize="zscore"))
    X = ds.views[0]
    assert np.all(np.abs(X.mean(axis=1)) <= 1e-10)
    assert abs(X[0].std() - 1) <= 1e-10 and abs(X[2].std() - 1) <= 1e-10
    np.testing.assert_array_equal(X[1], 0.0)


def test_unit_norm_alias():
    X = np.array([[3.0, 0.0], [4.0, 0.0]])
    np.testing.assert_allclose(data.normalize_view(X, "unit"), [[0.6, 0.0], [0.8, 0.0]])
    with pytest.raises(InvalidParameterError):
        data.normalize_view(X, "minmax")


def test_save_load_round_trip_bit_exact(tmp_path):
    ds = data.generate_synthetic(data.SyntheticSpec(n=60, k=3, dim=4, seed=3))
    m = data.save(ds, str(tmp_path), "rt")
    back = data.load(data.read_manifest(str(tmp_path / "rt.json")))
    for a, b in zip(ds.views, back.views):
        np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(ds.labels, back.labels)
    assert m.name == "rt"


def test_manifest_relative_paths(tmp_path):
    sub = tmp_path / "d"
    sub.mkdir()
    _write(sub / "a.csv", np.ones((3, 2)))
    (sub / "m.json").write_text(json.dumps({"name": "x", "views": ["a.csv"], "normalize": "unit"}))
    m = data.read_manifest(str(sub / "m.json"))
    assert m.view_files == (os.path.join(str(sub), "a.csv"),)
    assert m.normalize == "unit_norm" and m.label_file is None


def test_synthetic_defaults():
    ds = data.generate_synthetic()
    assert ds.n == 500 and ds.n_views == 2 and ds.dims == (2, 2)
    np.testing.assert_array_equal(np.bincount(ds.labels), [100] * 5)


def test_synthetic_deterministic():
    a = data.generate_synthetic(data.SyntheticSpec(seed=4))
    b = data.generate_synthetic(data.SyntheticSpec(seed=4))
    for x, y in zip(a.views, b.views):
        np.testing.assert_array_equal(x, y)
    c = data.generate_synthetic(data.SyntheticSpec(seed=5))
    assert not np.array_equal(a.views[0], c.views[0])


@pytest.mark.parametrize("n,k", [(7, 3), (10, 10), (101, 4), (5, 1)])
def test_synthetic_balanced(n, k):
    y = data.generate_synthetic(data.SyntheticSpec(n=n, k=k)).labels
    sizes = np.bincount(y, minlength=k)
    assert sizes.min() >= 1 and np.all(np.abs(sizes - n / k) <= 1)


def test_synthetic_spec_invariants():
    for bad in (dict(n=3, k=4), dict(k=0), dict(sigma=0.0), dict(radius=-1.0)):
        with pytest.raises(InvalidParameterError):
            data.SyntheticSpec(**bad)


def test_synthetic_separated_regime_full_pipeline():
    from emvgc.model import HyperParams
    from emvgc.pipeline import run

    ds = data.generate_synthetic(data.SyntheticSpec(sigma=0.05, radius=5.0, seed=1))
    report, _ = run(ds, HyperParams(lam=0.1, mu=1.0, m=5, k=5, seed=1))
    assert report.metrics["acc"] == 1.0
