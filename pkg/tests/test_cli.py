import json

import pytest

from reeb_systole.cli import main


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


@pytest.fixture
def spheroid(tmp_path):
    return write(tmp_path, "m.json", {"variant": "ellipsoid", "axes": [1.2, 1.0, 1.0]})


def run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def test_capacity(capsys):
    code, out = run(capsys, ["capacity", "--domain", "ball", "--k", "3"])
    assert code == 0 and json.loads(out)["value"] == pytest.approx(2.0)
    code, out = run(capsys, ["capacity", "--domain", "disk", "--k", "2", "--scale", "2"])
    assert code == 0 and "value" in json.loads(out)


def test_capacity_bad_k(capsys):
    assert main(["capacity", "--domain", "ball", "--k", "-1"]) == 2


def test_balance(capsys, spheroid):
    code, out = run(capsys, ["balance", "--metric", spheroid, "--search"])
    d = json.loads(out)
    assert code == 0
    assert d["balance"]["beta"] == pytest.approx(1 / 1.44)
    assert d["fiber_search"]["circumradius"] == pytest.approx(1.2, abs=1e-6)
    lo, hi = d["c1_interval"]
    assert lo <= hi


def test_curvature_csv(capsys, spheroid, tmp_path):
    csv_path = tmp_path / "k.csv"
    code, out = run(capsys, ["curvature", "--metric", spheroid, "--csv", str(csv_path)])
    d = json.loads(out)
    assert code == 0 and d["total_curvature"] == pytest.approx(12.566370614, abs=1e-6)
    assert csv_path.read_text().count("\n") > 100


def test_geometry(capsys, spheroid):
    code, out = run(capsys, ["geometry", "--metric", spheroid, "--resolution", "16",
                             "--band-limit", "8"])
    d = json.loads(out)
    assert code == 0 and d["diameter"] > 3.14


def test_systole_with_trajectory(capsys, spheroid, tmp_path):
    traj = tmp_path / "t.csv"
    code, out = run(capsys, ["systole", "--metric", spheroid, "--starts", "16",
                             "--trajectory-csv", str(traj)])
    d = json.loads(out)
    assert code == 0 and d["kind"] == "upper_bound"
    assert traj.read_text().startswith("t,x,y,z,vx,vy,vz")


def test_nirenberg_subcommands(capsys, tmp_path):
    code, out = run(capsys, ["nirenberg", "constants", "--truncation", "10"])
    assert code == 0 and json.loads(out)["cs_partial"] == pytest.approx(3.800732258529878)
    code, out = run(capsys, ["nirenberg", "beta-delta", "--delta", "1"])
    assert code == 0 and json.loads(out)["beta_bound"] == pytest.approx(3.096046011e-34)
    assert main(["nirenberg", "beta-delta", "--delta", "2"]) == 2

    k = write(tmp_path, "k.json", {"kind": "manufactured",
                                   "u": {"band_limit": 8, "coeffs": [[2, 0, 0.1]]}})
    code, out = run(capsys, ["nirenberg", "solve", "--curvature", k, "--bandlimit", "8"])
    d = json.loads(out)
    assert code == 0 and d["residual"] < 1e-8
    assert d["oscillation_chain"]["monotone"] and d["onofri_margin"] > 0

    hard = write(tmp_path, "h.json", {"kind": "exp_harmonic",
                                      "field": {"band_limit": 2, "coeffs": [[2, 0, 2.0]]}})
    code, out = run(capsys, ["nirenberg", "solve", "--curvature", hard, "--bandlimit", "4",
                             "--tol", "1e-12"])
    assert code == 1 and "error" in json.loads(out)


def test_verify(capsys, spheroid, tmp_path):
    out_json, out_csv = tmp_path / "r.json", tmp_path / "r.csv"
    code, out = run(capsys, ["verify", "--metric", spheroid, "--out", str(out_json),
                             "--csv", str(out_csv), "--starts", "16"])
    assert code == 0
    assert "systole_circumradius" in out and "holds" in out
    assert json.loads(out_json.read_text())["all_hold"]
    assert out_csv.exists()


def test_bad_inputs(tmp_path):
    assert main(["balance", "--metric", "/nonexistent.json"]) == 2
    bad = write(tmp_path, "bad.json", {"variant": "ellipsoid", "a": 1.0})
    assert main(["balance", "--metric", bad]) == 2
