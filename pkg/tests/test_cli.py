import csv
import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from musb import cli
from musb.transforms import apply
from musb.verify import CSV_FIELDS, ProbeSpec


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def test_kernel_classical_heat():
    code, out, _ = run("kernel", "--version", "C", "--mu", "0", "--t", "1", "--z", "0.5", "--q", "0.2")
    assert code == 0
    rec = json.loads(out)
    assert set(rec) == {"version", "mu", "t", "z", "q", "value"}
    assert rec["z"] == [0.5, 0.0]
    assert rec["value"][0] == pytest.approx((2 * math.pi) ** -0.5 * math.exp(-0.045), rel=1e-14)
    assert rec["value"][1] == 0.0


def test_kernel_a_at_origin():
    code, out, _ = run("kernel", "--version", "A", "--mu", "0.5", "--t", "1", "--z", "0", "--q", "1")
    assert code == 0
    assert json.loads(out)["value"][0] == pytest.approx(2 ** -0.5 * math.exp(-0.25), rel=1e-14)


def test_kernel_grids():
    code, out, _ = run("kernel", "--version", "b", "--mu", "0.3", "--t", "2",
                       "--z-grid", "-1:1:3,0:1:2", "--grid", "-1:1:5")
    assert code == 0
    recs = json.loads(out)
    assert len(recs) == 3 * 2 * 5
    assert recs[0]["z"] == [-1.0, 0.0] and recs[0]["q"] == -1.0
    assert all(r["version"] == "B" for r in recs)


def test_kernel_complex_parsing():
    code, out, _ = run("kernel", "--version", "A", "--mu", "0", "--t", "1", "--z", "-0.5+1.5i", "--q", "0.3")
    assert code == 0
    assert json.loads(out)["z"] == [-0.5, 1.5]


@pytest.mark.parametrize("argv,needle", [
    (("kernel", "--version", "A", "--mu", "-0.7", "--t", "1", "--z", "0", "--q", "0"), "mu > -1/2"),
    (("kernel", "--version", "A", "--mu", "0", "--t", "0", "--z", "0", "--q", "0"), "positive"),
    (("kernel", "--version", "A", "--mu", "0", "--t", "1", "--z", "1+", "--q", "0"), "malformed"),
    (("kernel", "--version", "E", "--mu", "0", "--t", "1", "--z", "0", "--q", "0"), "version"),
    (("kernel", "--version", "A", "--mu", "0", "--t", "1", "--q", "0"), "--z"),
    (("transform", "--version", "A", "--mu", "0", "--t", "1", "--probe", "hermite-0", "--z-grid", "0:1:0,0:0:1"),
     "empty"),
    (("transform", "--version", "A", "--mu", "0", "--t", "1", "--probe", "nope", "--z-grid", "0:1:2,0:0:1"),
     "probe"),
    (("verify", "--suite", "nonsense"), "suite"),
    (("verify", "--suite", "haar", "--jobs", "0"), "jobs"),
    (("heat", "--mu", "0", "--t", "1", "--probe", "const", "--x-grid", "0:1"), "start:stop:count"),
])
def test_usage_errors(argv, needle):
    code, _, err = run(*argv)
    assert code == 2
    assert needle in err


def test_heat_constant_probe():
    code, out, _ = run("heat", "--mu", "0.7", "--t", "1.5", "--probe", "const", "--x-grid", "-1:2:4")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["x", "re", "im", "route_residual", "moment_residual"]
    for row in rows[1:]:
        assert float(row[1]) == pytest.approx(1.0, abs=1e-10)
        assert float(row[3]) <= 1e-10 and float(row[4]) <= 1e-10
    assert out.count("\r\n") == 5


def test_heat_classical_gaussian():
    code, out, _ = run("heat", "--mu", "0", "--t", "1", "--probe", "gauss", "--x-grid", "-1,0,0.5")
    assert code == 0
    for row in list(csv.reader(io.StringIO(out)))[1:]:
        x = float(row[0])
        assert float(row[1]) == pytest.approx(math.exp(-x * x / 4) / math.sqrt(2), abs=1e-13)


def test_heat_inline_probe(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"name": "odd", "coeffs": [[0, 0], [1, 0]], "rate": 0.5}))
    code, out, _ = run("heat", "--mu", "0.5", "--t", "1", "--probe", str(path), "--x-grid", "0.5")
    assert code == 0


def test_transform_rows_round_trip():
    code, out, _ = run("transform", "--version", "A", "--mu", "0", "--t", "1", "--probe", "hermite-0",
                       "--z-grid", "-1:1:3,-0.5:0.5:2")
    assert code == 0
    rows = json.loads(out)
    assert len(rows) == 6
    for row in rows:
        assert {"version", "mu", "t", "probe", "z", "value"} <= set(row)
        spec = ProbeSpec.from_dict(row["probe"])
        z = complex(*row["z"])
        expected = (2 * math.pi) ** -0.25 * math.sqrt(4 * math.pi / 3) * np.exp(-z * z / 6)
        assert complex(*row["value"]) == pytest.approx(expected, rel=1e-12)
        assert complex(*row["value"]) == pytest.approx(apply("A", spec.to_polygauss(), 0.0, 1.0, z), rel=1e-15)


def test_transform_b_matches_a_of_inverse_change():
    grid = "-1:1:3,0:1:2"
    _, out_b, _ = run("transform", "--version", "B", "--mu", "0.5", "--t", "1", "--probe", "hermite-1", "--z-grid", grid)
    root = math.sqrt(0.5)  # sigma(0) at mu=1/2, t=1
    lifted = json.dumps({"name": "lifted", "coeffs": [[0, 0], [root, 0]], "rate": 0.75})
    _, out_a, _ = run("transform", "--version", "A", "--mu", "0.5", "--t", "1", "--probe", lifted, "--z-grid", grid)
    for b, a in zip(json.loads(out_b), json.loads(out_a)):
        assert complex(*b["value"]) == pytest.approx(complex(*a["value"]), rel=1e-10)


def test_verify_ac_identity_passes():
    code, out, err = run("verify", "--suite", "ac-identity")
    assert code == 0
    doc = json.loads(out)
    assert doc["summary"]["failed"] == 0
    assert all(r["max_residual"] <= 1e-12 for r in doc["reports"])
    assert "passed" in err


def test_verify_haar_csv():
    code, out, _ = run("verify", "--suite", "haar", "--out", "csv", "--mu-grid", "0,1", "--t-grid", "1")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == CSV_FIELDS
    assert len(rows) == 1 + 2 * 2
    assert all(r[5] == "true" for r in rows[1:])


def test_verify_reports_failures_with_exit_one():
    code, out, _ = run("verify", "--suite", "pde", "--mu-grid", "1", "--t-grid", "0.25")
    assert code == 1
    assert json.loads(out)["summary"]["failed"] >= 1


def test_verify_deterministic_across_jobs():
    argv = ("verify", "--suite", "heat", "--mu-grid", "-0.1,0.5", "--t-grid", "1,4")
    _, one, _ = run(*argv, "--jobs", "1")
    _, two, _ = run(*argv, "--jobs", "2")
    strip = lambda doc: [(r["identity_id"], r["params"], r["max_residual"]) for r in json.loads(doc)["reports"]]  # noqa: E731
    assert strip(one) == strip(two)


@pytest.mark.slow
def test_verify_classical_unitarity():
    code, out, _ = run("verify", "--suite", "unitarity", "--mu-grid", "0")
    assert code == 0
    assert all(r["max_residual"] <= 1e-6 for r in json.loads(out)["reports"])


def test_nonconvergence_exit_code(monkeypatch):
    monkeypatch.setenv("MUSB_QUAD_LEVEL", "3")
    code, _, err = run("heat", "--mu", "0", "--t", "1", "--probe", "hermite-2", "--x-grid", "0.3")
    assert code == 3
    assert "not converged" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "musb", "kernel", "--version", "D", "--mu", "1", "--t", "1",
                           "--z", "0", "--q", "0"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["version"] == "D"
    bad = subprocess.run([sys.executable, "-m", "musb", "kernel"], capture_output=True, text=True, check=False)
    assert bad.returncode == 2
