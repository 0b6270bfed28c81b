import json

import numpy as np

from lattice_ar.cli import main
from lattice_ar.io import load_matrix, save_matrix, save_vector


def _manifests(d):
    return sorted(d.rglob("*.manifest.json"))


def test_validate_trivial(tmp_path, capsys):
    save_matrix(np.zeros((3, 3)), tmp_path / "C.csv")
    save_vector(np.ones(3), tmp_path / "M.csv")
    code = main(["--manifest", str(tmp_path / "run.json"), "validate",
                 "--car", str(tmp_path / "C.csv"), str(tmp_path / "M.csv")])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["pass"] and all(c["pass"] for c in report["conditions"])
    man = json.loads((tmp_path / "run.json").read_text())
    assert man["subcommand"] == "validate" and man["exit_code"] == 0 and "version" in man


def test_validate_failure_exit_one(tmp_path, capsys):
    b = np.zeros((2, 2))
    b[0, 0] = 0.2
    save_matrix(b, tmp_path / "B.csv")
    save_vector(np.ones(2), tmp_path / "O.csv")
    code = main(["--manifest", str(tmp_path / "run.json"), "validate",
                 "--sar", str(tmp_path / "B.csv"), str(tmp_path / "O.csv")])
    assert code == 1
    assert not json.loads(capsys.readouterr().out)["pass"]


def test_unknown_subcommand(capsys):
    assert main(["frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err


def test_missing_input(tmp_path):
    code = main(["--manifest", str(tmp_path / "m.json"), "validate", "--model", str(tmp_path / "nope.json")])
    assert code == 2
    assert json.loads((tmp_path / "m.json").read_text())["error"]


def test_convert_and_back(tmp_path, grid_sigma):
    save_matrix(grid_sigma, tmp_path / "sigma.csv")
    assert main(["convert", "--covariance", str(tmp_path / "sigma.csv"), "--to", "sar",
                 "--kind", "cholesky", "--out", str(tmp_path / "sar.json")]) == 0
    assert main(["convert", "--model", str(tmp_path / "sar.json"), "--to", "car",
                 "--out", str(tmp_path / "car.json")]) == 0
    c = load_matrix(tmp_path / "car_C.csv")
    from lattice_ar.convert import car_from_covariance
    np.testing.assert_allclose(c, car_from_covariance(grid_sigma).c, atol=1e-10)
    assert len(_manifests(tmp_path)) == 1  # second run overwrites the first run's manifest name
    assert json.loads((tmp_path / "sar.json").read_text())["root_kind"] == "cholesky"


def test_haining_exit_one(tmp_path):
    save_matrix(np.array([[0, 0.5], [0, 0]]), tmp_path / "B.csv")
    assert main(["convert", "--haining", str(tmp_path / "B.csv"), "--out", str(tmp_path / "h.json")]) == 1


def test_sparsify_deterministic(tmp_path, grid_sigma):
    save_matrix(grid_sigma, tmp_path / "sigma.csv")
    for d in ("a", "b"):
        assert main(["sparsify", "--covariance", str(tmp_path / "sigma.csv"), "--sweeps", "1",
                     "--nonneg", "--out-dir", str(tmp_path / d)]) == 0
    for f in ("B.csv", "Omega.csv", "trace.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert len((tmp_path / "a" / "trace.csv").read_text().splitlines()) == 301
    assert (tmp_path / "a" / "sparsify.manifest.json").exists()


def test_fit_bundled(tmp_path):
    out = tmp_path / "fit.json"
    code = main(["fit", "--family", "car-unstandardized", "--dataset", "columbus", "--out", str(out),
                 "--emit-marginals", str(tmp_path / "marg")])
    assert code == 0
    doc = json.loads(out.read_text())
    assert abs(doc["neg2_reml"] - 388.83) < 0.5
    assert set(doc) >= {"theta_hat", "neg2_reml", "bounds", "iterations"}
    assert load_matrix(tmp_path / "marg" / "marginal_correlations.csv").shape == (49, 49)


def test_fit_from_files(tmp_path):
    from lattice_ar.io import _bundled_dir
    d = _bundled_dir("columbus")
    out = tmp_path / "fit.json"
    code = main(["fit", "--family", "spherical", "--data", str(d / "crime.csv"),
                 "--centroids", str(d / "centroids.csv"), "--out", str(out)])
    assert code == 0
    assert abs(json.loads(out.read_text())["neg2_reml"] - 374.61) < 0.5


def test_fit_missing_adjacency(tmp_path):
    from lattice_ar.io import _bundled_dir
    d = _bundled_dir("columbus")
    assert main(["--manifest", str(tmp_path / "m.json"), "fit", "--family", "sar",
                 "--data", str(d / "crime.csv"), "--out", str(tmp_path / "f.json")]) == 2


def test_report_bounds(tmp_path, capsys):
    from lattice_ar.io import _bundled_dir
    code = main(["--manifest", str(tmp_path / "m.json"), "report",
                 "--adjacency", str(_bundled_dir("columbus") / "neighbors.txt")])
    assert code == 0
    lo, hi = json.loads(capsys.readouterr().out)["rho_bounds"]
    assert abs(lo + 0.335) < 1e-3 and abs(hi - 0.167) < 1e-3


def test_report_grid(tmp_path, grid_sigma):
    assert main(["report", "--grid", "5x5", "--covariance-out", str(tmp_path / "s.csv"),
                 "--out", str(tmp_path / "r.json")]) == 0
    assert np.abs(load_matrix(tmp_path / "s.csv") - grid_sigma.sigma).max() < 1e-15


def test_reproduce_columbus(tmp_path):
    assert main(["reproduce-columbus", "--out-dir", str(tmp_path)]) == 0
    fits = sorted(tmp_path.glob("fit_*.json"))
    assert len(fits) == 4
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["nesting_cg_le_sp"]
    assert (tmp_path / "reproduce-columbus.manifest.json").exists()


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("LATTICE_AR_THREADS", "1")
    assert main(["report", "--grid", "3x3", "--out", str(tmp_path / "r.json")]) == 0
