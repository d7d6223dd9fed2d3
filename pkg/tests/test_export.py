import json

import numpy as np
import pytest

from blockpca import export, qve
from blockpca.model import make_model


def test_metadata_keys():
    meta = export.metadata("abc", 7, eta=1e-7)
    assert meta["tool"] == "blockpca" and meta["modelHash"] == "abc" and meta["seed"] == 7
    assert meta["eta"] == 1e-7 and "qveResidual" in meta["tolerances"]
    assert "seed" not in export.metadata()


def test_csv_round_trip_exact_floats(tmp_path):
    vals = [0.1, 1 / 3, np.float64(2.0) ** -40]
    p = export.write_csv(tmp_path / "a.csv", ["v", "tag"], [[v, "x"] for v in vals], export.metadata("h", 1))
    meta, header, rows = export.read_csv(p)
    assert header == ["v", "tag"] and meta["modelHash"] == "h" and meta["seed"] == 1
    assert [float(r[0]) for r in rows] == [float(v) for v in vals]


def test_json_handles_numpy(tmp_path):
    payload = {"a": np.arange(3), "b": np.float64(0.5), "c": np.bool_(True)}
    p = export.write_json(tmp_path / "a.json", payload, export.metadata(seed=3))
    back = json.loads(p.read_text())
    assert back["a"] == [0, 1, 2] and back["b"] == 0.5 and back["c"] is True
    assert back["metadata"]["seed"] == 3


def test_json_rejects_unknown_objects(tmp_path):
    with pytest.raises(TypeError):
        export.write_json(tmp_path / "a.json", {"x": object()}, {})


def test_density_rows_columns():
    m = make_model([0.5, 0.5], [[2.0, 0.5], [0.5, 1.0]])
    curve = qve.density(m, np.linspace(-2, 1.5, 20))
    header, rows = export.density_rows(curve)
    assert header == ["x", "density", "density_1", "density_2"]
    assert len(rows) == 20 and rows[3][0] == curve.grid[3]


def test_histogram_csv(tmp_path):
    counts, edges = np.histogram([0.1, 0.2, 0.9], bins=3, range=(0, 1))
    _, header, rows = export.read_csv(export.write_histogram(tmp_path / "h.csv", edges, counts, {}))
    assert header == ["bin_left", "bin_right", "count"]
    assert [int(r[2]) for r in rows] == [2, 0, 1]


def test_eigenvalue_dump_round_trip(tmp_path):
    v = np.random.default_rng(0).standard_normal(17)
    p = export.write_eigenvalues(tmp_path / "e.bin", v)
    assert p.stat().st_size == 8 + 8 * 17
    assert np.array_equal(export.read_eigenvalues(p), v)


def test_eigenvalue_dump_truncated(tmp_path):
    p = export.write_eigenvalues(tmp_path / "e.bin", np.ones(4))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(ValueError):
        export.read_eigenvalues(p)
