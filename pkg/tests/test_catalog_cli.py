import json

import numpy as np
import pytest

from crlab import cli
from crlab.catalog import CATALOG, EXPECTED, HEX_TORUS_AREA, make_chart
from crlab.immersion import check_chart, horizontality_residual, sample_interior
from crlab.integration import build_grid, volume


def run(argv, tmp_path=None):
    code, report = cli.run_command(argv)
    return code, report


def test_hex_torus_origin():
    p = make_chart("hexagonal_torus").point(np.zeros(2))
    s = 1 / np.sqrt(3)
    assert np.allclose(p, [s, s, s, 0, 0, 0], atol=1e-15)


def test_whitney_at_zero_is_geodesic():
    u = sample_interior(make_chart("geodesic_sphere"), 10, 3)
    a = make_chart("whitney_sphere", b=[0] * 6).jet_batch(u)
    b = make_chart("geodesic_sphere").jet_batch(u)
    for x, y in zip(a, b):
        assert np.allclose(x, y, atol=1e-14)


def test_geodesic_sphere_volume():
    c = make_chart("geodesic_sphere", m=2, n=2)
    assert volume(c, build_grid(c)) == pytest.approx(4 * np.pi, abs=1e-8)


@pytest.mark.parametrize("name,params", [
    ("geodesic_sphere", {}), ("geodesic_sphere", {"m": 3, "n": 3}), ("geodesic_sphere", {"m": 1, "n": 2}),
    ("whitney_sphere", {"b": [0.5, 0.1, 0, 0, 0.2, 0.3]}), ("whitney_sphere", {"m": 3, "n": 3, "b": [0.2] * 8}),
    ("hexagonal_torus", {}), ("horizontal_circle", {}), ("horizontal_circle", {"n": 3}),
    ("perturbed_torus", {}), ("perturbed_torus", {"amplitude": 0.6, "mode": 5}),
])
def test_catalog_charts_are_horizontal(name, params):
    c = make_chart(name, **params)
    u = sample_interior(c, 50, 9)
    assert horizontality_residual(c, u) <= 1e-8
    check_chart(c, u)


def test_perturbed_torus_zero_amplitude_and_volume_change():
    assert make_chart("perturbed_torus", amplitude=0.0).name == "hexagonal_torus"
    c = make_chart("perturbed_torus", amplitude=0.3)
    assert volume(c, build_grid(c, 96)) < HEX_TORUS_AREA - 1e-2


@pytest.mark.parametrize("name,params", [
    ("nonexistent", {}), ("geodesic_sphere", {"m": 3, "n": 2}), ("whitney_sphere", {"b": [1.0, 0, 0, 0, 0, 0]}),
    ("whitney_sphere", {"b": [0.1, 0.1]}), ("perturbed_torus", {"amplitude": 1.2}),
    ("perturbed_torus", {"mode": 7}), ("horizontal_circle", {"n": 0}),
])
def test_make_chart_errors(name, params):
    with pytest.raises(ValueError):
        make_chart(name, **params)


def test_plugin_chart(tmp_path, monkeypatch):
    (tmp_path / "my_charts.py").write_text(
        "from crlab.catalog import geodesic_sphere\n"
        "def sphere(m=2, n=2):\n    return geodesic_sphere(m, n)\n"
        "def broken():\n    return 3\n")
    monkeypatch.syspath_prepend(str(tmp_path))
    c = make_chart("my_charts:sphere", m=1, n=1)
    assert c.m == 1
    with pytest.raises(ValueError):
        make_chart("my_charts:broken")
    with pytest.raises(ValueError):
        make_chart("my_charts:missing")
    code, rep = run(["volume", "--chart", "my_charts:sphere"])
    assert code == 0 and rep["volume"] == pytest.approx(4 * np.pi, abs=1e-8)


def test_expected_table_covers_catalog():
    assert set(EXPECTED) == set(CATALOG)


def test_cli_volume(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, rep = run(["volume", "--chart", "geodesic_sphere", "--m", "2", "--n", "2", "--out", str(out)])
    assert code == 0
    assert rep["volume"] == pytest.approx(4 * np.pi, abs=1e-8)
    text = out.read_text()
    assert json.loads(text) == rep
    assert text == json.dumps(rep, indent=2, sort_keys=True) + "\n"
    assert "volume = 12.566370614" in capsys.readouterr().out


def test_cli_cr_volume_hex():
    code, rep = run(["cr-volume", "--chart", "hexagonal_torus", "--res", "64"])
    assert code == 0
    assert rep["cr_volume"]["value"] == pytest.approx(HEX_TORUS_AREA, abs=1e-6)
    assert rep["cr_volume"]["argmax_norm"] <= 1e-3
    assert rep["parameters"]["optimizer"]["seed"] == 0


def test_cli_reports_are_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert run(["normalize", "--chart", "whitney_sphere", "--b", "0.3,0,0,0.1,0,0", "--seed", "4",
                    "--out", str(p)])[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_energies_and_balance():
    code, rep = run(["energies", "--chart", "hexagonal_torus"])
    assert code == 0 and rep["parameters"]["genus"] == 1
    assert abs(rep["energies"]["gauss_bonnet_residual"]) <= 1e-4
    code, rep = run(["balance", "--chart", "whitney_sphere", "--b", "0.4,0,0,0,0,0", "--res", "32"])
    assert code == 0 and rep["balance"]["residual"] <= 1e-8


def test_cli_normalize():
    code, rep = run(["normalize", "--chart", "whitney_sphere", "--b", "0.3,0,0,0.1,0,0", "--u", "1.0,2.0"])
    assert code == 0
    assert rep["normalization"]["mean_curv_norm"][-1] <= 1e-6
    assert abs(rep["normalization"]["div_jhn"][-1]) <= 1e-4
    assert rep["parameters"]["u"] == [1.0, 2.0]


def test_cli_verify_commands():
    code, rep = run(["verify", "appendix", "--cases", "50", "--seed", "7"])
    assert code == 0 and rep["failed"] == 0
    assert all(r["value"] <= 1e-10 for r in rep["checks"] if r["name"][0] in "JI")
    code, rep = run(["verify", "sextic", "--m", "2"])
    assert code == 0 and rep["passed"] == 1


def test_cli_verify_identities():
    code, rep = run(["verify", "identities"])
    assert code == 0 and rep["failed"] == 0
    names = {r["name"] for r in rep["checks"]}
    assert "hexagonal_torus.volume" in names and "perturbed_torus.W_CR" in names


def test_cli_invariant_violation_exit_code(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "identity_checks", lambda seed=0, count=5: [("forced", 1.0, 0.5), ("fine", 0.0, 1.0)])
    out = tmp_path / "r.json"
    code, rep = run(["verify", "identities", "--out", str(out)])
    assert code == 3
    assert rep["failed"] == 1 and rep["exit_code"] == 3
    assert json.loads(out.read_text())["exit_code"] == 3


def test_cli_numerical_failure_exit_code(monkeypatch):
    def fail(*a, **k):
        raise RuntimeError("balance iteration stagnated")
    monkeypatch.setattr(cli, "balance_point", fail)
    assert run(["balance", "--chart", "geodesic_sphere"]) == (2, None)


@pytest.mark.parametrize("argv", [
    [], ["nonsense"], ["volume", "--bogus", "1"], ["volume", "--chart", "nope"],
    ["volume", "--res", "x"], ["volume", "--res", "2"], ["whatever", "--chart", "hexagonal_torus"],
    ["cr-volume", "--chart", "whitney_sphere", "--b", "0.9,0.9,0,0,0,0"],
    ["normalize", "--chart", "hexagonal_torus", "--u", "0.1"], ["asymptotics", "fit"],
    ["lambda1", "--lattice", "triangle"], ["lambda1", "--basis", "1,0,2,0"], ["volume", "--config", "/no/such/file"],
])
def test_cli_usage_errors(argv):
    assert run(argv)[0] == 1


def test_cli_lambda1():
    code, rep = run(["lambda1", "--lattice", "hex", "--area", str(4 * np.pi**2 / np.sqrt(3) * 2 / 2)])
    assert code == 0
    code, rep = run(["lambda1", "--lattice", "square"])
    assert rep["lambda1"] == pytest.approx(4 * np.pi**2, rel=1e-14)
    code, rep = run(["lambda1", "--basis", "1,0,0.5,0.8660254037844386", "--area", str(HEX_TORUS_AREA / 2 * 2)])
    assert rep["lambda1"] * rep["parameters"]["area"] / 2 == pytest.approx(rep["half_lambda1_area"], rel=1e-14)


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("chart = whitney_sphere   # the sphere\nb = 0.2,0,0,0,0,0\nres = 24\n")
    code, rep = run(["volume", "--config", str(cfg)])
    assert code == 0
    assert rep["parameters"]["chart"] == "whitney_sphere" and rep["parameters"]["resolution"] == [24, 24]
    assert rep["parameters"]["b"] == [0.2, 0, 0, 0, 0, 0]
    code, rep = run(["volume", "--config", str(cfg), "--res", "32", "--chart", "hexagonal_torus"])
    assert rep["parameters"]["resolution"] == [32, 32] and rep["parameters"]["chart"] == "hexagonal_torus"
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert run(["volume", "--config", str(bad)])[0] == 1
    bad.write_text("res = many\n")
    assert run(["volume", "--config", str(bad)])[0] == 1


def test_cli_asymptotics_scan_and_fit(tmp_path):
    csv = tmp_path / "scan.csv"
    code, rep = run(["asymptotics", "scan", "--chart", "hexagonal_torus", "--u", "0.3,0.7", "--csv", str(csv)])
    assert code == 0
    assert rep["fit"]["coefficients"][0] == pytest.approx(4 * np.pi, abs=1e-3)
    assert rep["predicted_c1"] == pytest.approx(16 * np.pi / 9, rel=1e-9)
    code, fit = run(["asymptotics", "fit", "--chart", "hexagonal_torus", "--input", str(csv)])
    assert code == 0
    assert np.allclose(fit["fit"]["coefficients"], rep["fit"]["coefficients"], rtol=1e-12, atol=1e-12)
    code, fit3 = run(["asymptotics", "fit", "--input", str(csv), "--chart", "hexagonal_torus", "--extended", "no"])
    assert fit3["fit"]["basis"] == ["1", "t(-log t)", "t"]


def test_main_entry_point():
    assert cli.main(["lambda1"]) == 0
    assert cli.main(["--help"]) == 0
