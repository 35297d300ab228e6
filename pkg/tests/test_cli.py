import csv
import json

import pytest

from dbargauge.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_bundled(capsys):
    code, out, _ = run(capsys, "verify", "bundled:grothendieck_n1")
    rep = json.loads(out)
    assert code == 0 and rep["pass"] and all(rep["exact_zero"].values())
    code, out, _ = run(capsys, "verify", "bundled:nonintegrable_n2")
    rep = json.loads(out)
    assert code == 1 and not rep["pass"] and rep["failing"] == ["0,0"]
    assert rep["integrability"]["0,0"] == pytest.approx(1.0)
    code, out, _ = run(capsys, "verify", "bundled:manufactured_m1")
    assert code == 0 and json.loads(out)["pass"]


def test_verify_input_errors(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 1, "m": 0,,}')
    code, _, err = run(capsys, "verify", str(bad))
    assert code == 2 and "line 1" in err
    code, _, err = run(capsys, "verify", str(tmp_path / "missing.json"))
    assert code == 2
    expr = tmp_path / "expr.json"
    expr.write_text(json.dumps({"n": 1, "m": 0, "p": [1], "backend": "series",
                                "omega": {"0,0": [["z ^ zb"]]}}))
    code, _, err = run(capsys, "verify", str(expr))
    assert code == 2 and "column" in err


def test_identities_deterministic_and_corrupt_hook(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "identities", "--cases", "12", "-o", str(a))[0] == 0
    assert run(capsys, "identities", "--cases", "12", "-o", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    code, out, _ = run(capsys, "identities", "--cases", "12", "--corrupt-product")
    rep = json.loads(out)
    assert code == 1
    assert {f["check"] for f in rep["failures"]} == {"action_check"}


def test_solve_exit_codes(capsys, tmp_path):
    hist = tmp_path / "h.csv"
    code, out, _ = run(capsys, "solve", "bundled:manufactured_m0", "--grid", "64x128",
                       "--tol", "1e-7", "--history", str(hist))
    rep = json.loads(out)
    assert code == 0 and rep["converged"]
    rows = list(csv.DictReader(hist.open()))
    assert len(rows) == rep["iterations"] + 1 and "a_k" in rows[0]
    code, out, err = run(capsys, "solve", "bundled:manufactured_m0", "--r0", "0.95",
                         "--grid", "32x64")
    assert code == 3 and "smaller r0" in err and "error" in json.loads(out)
    code, out, _ = run(capsys, "solve", "bundled:manufactured_m0", "--max-iter", "0",
                       "--grid", "32x64")
    rep = json.loads(out)
    assert code == 1 and rep["iterations"] == 0 and rep["reason"] == "max_iter reached"
    assert run(capsys, "solve", "bundled:nonintegrable_n2")[0] == 2
    assert run(capsys, "solve", "bundled:manufactured_m0", "--eps", "0.9")[0] == 2


def test_homotopy_command(capsys):
    code, out, _ = run(capsys, "homotopy", "--probe", "zero", "--grid", "32x64")
    assert code == 0 and json.loads(out)["residual"] == 0.0
    code, out, _ = run(capsys, "homotopy", "--probe", "exp(z*zb)", "--grid", "64x128",
                       "--refine", "--max-residual", "1e-6")
    rep = json.loads(out)
    assert code == 0 and rep["refinement"]["order"] >= 1
    code, out, _ = run(capsys, "homotopy", "--probe", "zzbdzb", "--grid", "32x64",
                       "--max-residual", "1e-30")
    assert code == 1
    code, out, _ = run(capsys, "homotopy", "--grid", "32x64", "--norm-probe")
    assert json.loads(out)["norm_probe"]["ratio"] > 0
    assert run(capsys, "homotopy", "--probe", "z +")[0] == 2


def test_norms_command(capsys):
    code, out, _ = run(capsys, "norms", "bundled:grothendieck_n1", "--h", "1", "--K", "3")
    rep = json.loads(out)
    assert code == 0 and rep["weights"][0] == 1.0 and rep["weight_violations"] == []
    assert rep["c"] == 0.0 and rep["a"] > 0
    assert run(capsys, "norms", "bundled:grothendieck_n1", "--h", "4", "--K", "3")[0] == 2


def test_bad_grid_argument(capsys):
    with pytest.raises(SystemExit):
        main(["solve", "bundled:manufactured_m0", "--grid", "12"])
