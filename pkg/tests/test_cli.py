import json

import numpy as np
import pytest

from blockpca import cli, export
from blockpca.cli import EXIT_CONFIG, EXIT_OK


@pytest.fixture
def model_file(tmp_path):
    p = tmp_path / "model.json"
    p.write_text(json.dumps({"K": 2, "rho": ["1/2", "1/2"], "S": [[137 / 23, 0.5], [0.5, 0.25]]}))
    return p


def test_predict_writes_outputs(tmp_path, model_file):
    out = tmp_path / "out"
    assert cli.main(["predict", "--model", str(model_file), "--out", str(out), "--grid=-7:1.3:800"]) == EXIT_OK
    pred = json.loads((out / "prediction.json").read_text())
    edges = json.loads((out / "edges.json").read_text())
    assert pred["phase"] == "supercritical" and pred["topEigLimit"] == 1.0
    assert pred["metadata"]["modelHash"] and pred["metadata"]["tolerances"]
    assert edges["rightEdge"] < 1.0 and edges["mass"] == pytest.approx(1.0, abs=0.02)
    meta, header, rows = export.read_csv(out / "density.csv")
    assert header[:2] == ["x", "density"] and len(rows) == 800
    assert (out / "density.json").exists()


def test_predict_format_csv_only(tmp_path, model_file):
    out = tmp_path / "o"
    assert cli.main(["predict", "--model", str(model_file), "--out", str(out), "--format", "csv"]) == EXIT_OK
    assert (out / "density.csv").exists() and not (out / "density.json").exists()


def test_predict_deterministic(tmp_path, model_file):
    for name in ("a", "b"):
        cli.main(["predict", "--model", str(model_file), "--out", str(tmp_path / name), "--grid=-1:1.2:50"])
    assert (tmp_path / "a" / "density.csv").read_bytes() == (tmp_path / "b" / "density.csv").read_bytes()


def test_malformed_model_exits_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["predict", "--model", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "error [cli.predict]" in capsys.readouterr().err


def test_invalid_model_exits_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"K": 2, "rho": [0.7, 0.7], "S": [[1, 1], [1, 1]]}))
    assert cli.main(["predict", "--model", str(bad), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "error [model.validate]" in capsys.readouterr().err


def test_missing_model_exits_config(tmp_path):
    assert cli.main(["predict", "--model", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_n_below_k_exits_config(tmp_path, model_file):
    assert cli.main(["simulate", "--model", str(model_file), "--out", str(tmp_path), "--N", "1"]) == EXIT_CONFIG


def test_unknown_figure_exits_config(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["reproduce", "fig9", "--out", str(tmp_path)])
    assert exc.value.code == EXIT_CONFIG


def test_bad_grid_exits_config(tmp_path, model_file):
    with pytest.raises(SystemExit) as exc:
        cli.main(["predict", "--model", str(model_file), "--out", str(tmp_path), "--grid", "1:0:10"])
    assert exc.value.code == EXIT_CONFIG


def test_simulate_deterministic(tmp_path, model_file):
    args = ["simulate", "--model", str(model_file), "--N", "150", "--samples", "2", "--seed", "4"]
    cli.main(args + ["--out", str(tmp_path / "a"), "--dump-eigenvalues"])
    cli.main(args + ["--out", str(tmp_path / "b"), "--workers", "2"])
    a = (tmp_path / "a" / "simulation.json").read_text()
    assert a == (tmp_path / "b" / "simulation.json").read_text()
    assert (tmp_path / "a" / "overlaps.csv").read_bytes() == (tmp_path / "b" / "overlaps.csv").read_bytes()
    ev = export.read_eigenvalues(tmp_path / "a" / "eigenvalues_1.bin")
    assert ev.size == 150 and ev[-1] == json.loads(a)["perSample"][1]["topValue"]
    _, _, rows = export.read_csv(tmp_path / "a" / "histogram.csv")
    assert sum(int(r[2]) for r in rows) == 300


def test_sweep_values(tmp_path, model_file):
    args = ["sweep", "--model", str(model_file), "--out", str(tmp_path), "--param", "S[1,1]"]
    assert cli.main(args + ["--values", "0.5,6,12", "--N", "120", "--samples", "2"]) == EXIT_OK
    meta, header, rows = export.read_csv(tmp_path / "sweep.csv")
    assert header[:3] == ["t", "snr", "phase"] and "mc_q_sq_mean" in header
    assert [r[2] for r in rows] == ["subcritical", "supercritical", "supercritical"]
    assert "warning" not in meta


def test_sweep_snr_targets(tmp_path, model_file):
    args = ["sweep", "--model", str(model_file), "--out", str(tmp_path), "--param", "S[1,2]"]
    assert cli.main(args + ["--snr", "3.5,4", "--N", "100", "--samples", "1"]) == EXIT_OK
    _, header, rows = export.read_csv(tmp_path / "sweep.csv")
    assert [float(r[1]) for r in rows] == pytest.approx([3.5, 4.0], abs=1e-9)


def test_sweep_non_monotone_warns(tmp_path, model_file, capsys):
    args = ["sweep", "--model", str(model_file), "--out", str(tmp_path), "--param", "S[1,1]"]
    assert cli.main(args + ["--values", "2,1,3", "--N", "60", "--samples", "1"]) == EXIT_OK
    meta, _, _ = export.read_csv(tmp_path / "sweep.csv")
    assert "monotone" in meta["warning"] and "warning [cli.sweep]" in capsys.readouterr().err


def test_sweep_bad_param(tmp_path, model_file):
    args = ["sweep", "--model", str(model_file), "--out", str(tmp_path), "--values", "1"]
    assert cli.main(args + ["--param", "S[3,1]"]) == EXIT_CONFIG
    assert cli.main(args + ["--param", "gamma[1]"]) == EXIT_CONFIG


def test_parameter_builder_rho():
    from blockpca.model import make_model

    m = make_model([0.2, 0.3, 0.5], np.ones((3, 3)))
    r = cli.parameter_builder(m, "rho[1]")(0.6)
    assert r.rho == pytest.approx([0.6, 0.4 * 0.375, 0.4 * 0.625])


def test_selftest_passes(capsys):
    assert cli.main(["selftest"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 5


def test_reproduce_fig1_small(tmp_path):
    assert cli.main(["reproduce", "fig1", "--out", str(tmp_path), "--N", "300", "--seed", "1"]) == EXIT_OK
    summary = json.loads((tmp_path / "fig1_summary.json").read_text())
    assert [summary[f"panel{i}"]["phase"] for i in (1, 2, 3)] == ["subcritical", "critical", "supercritical"]
    assert (tmp_path / "fig1.gp").exists() and (tmp_path / "fig1_panel3_density.csv").exists()


def test_reproduce_fig2_small(tmp_path):
    args = ["reproduce", "fig2", "--out", str(tmp_path), "--N", "80", "--samples", "1"]
    assert cli.main(args) == EXIT_OK
    _, header, rows = export.read_csv(tmp_path / "fig2_right.csv")
    mc_rows = [r for r in rows if r[header.index("mc_top_mean")] != "nan"]
    assert len(mc_rows) == 8
    assert (tmp_path / "fig2.gp").exists()
