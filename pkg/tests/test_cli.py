import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gonodyn.cli import main
from gonodyn.operators import build_C3

DATA = Path(__file__).parent / "data"
GOLDEN = DATA / "c3_golden.json"


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def u_config(n=4, j=2, l=3, u=None, a=0.5):
    return {"n": n, "rate": {"a": a}, "tensor": {"family": "U", "j": j, "l": l},
            "initial": {"level": "normalized", "u": u or [1 / n] * n}}


class TestValidate:
    def test_ok(self, capsys):
        code, out, _ = run(["validate", str(GOLDEN)], capsys)
        assert code == 0 and json.loads(out)["valid"] is True

    def test_row_sum_violation_names_pair(self, tmp_path, capsys):
        cfg = {"n": 2, "rate": {"a": 0.5},
               "tensor": {"dense": [[[1, 0], [1, 0]], [[1, 0], [0.5, 0.6]]]}}
        code, out, _ = run(["validate", write(tmp_path, cfg)], capsys)
        assert code == 1
        err = json.loads(out)["errors"][0]
        assert (err["i"], err["p"]) == (2, 2) and err["row_sum"] == pytest.approx(1.1)

    def test_malformed_json(self, tmp_path, capsys):
        code, out, err = run(["validate", write(tmp_path, '{"n": 3')], capsys)
        assert code == 2 and out == "" and "cannot read" in err

    def test_missing_file(self, tmp_path, capsys):
        assert run(["validate", str(tmp_path / "nope.json")], capsys)[0] == 2

    @pytest.mark.parametrize("patch", [
        {"bogus": 1},
        {"rate": {"a": 0.5, "temperature": {"tau": [0, 0, 1], "mu1": 0.9, "mu2": 0.2}}},
        {"rate": {"a": 1.0}},
        {"tensor": {"family": "U", "j": 5, "l": 1}},
        {"tensor": {"family": "C3"}},
        {"initial": {"level": "full", "u": [1, 0, 0, 0]}},
    ])
    def test_schema_errors(self, tmp_path, capsys, patch):
        cfg = dict(u_config(), **patch)
        code, out, _ = run(["validate", write(tmp_path, cfg)], capsys)
        assert code == 1 and json.loads(out)["valid"] is False

    def test_temperature_rate(self, tmp_path, capsys):
        cfg = dict(u_config(), rate={"temperature": {"tau": [0.5, 0.5, 0], "mu1": 0.8, "mu2": 0.3}})
        code, out, _ = run(["validate", write(tmp_path, cfg)], capsys)
        assert code == 0 and json.loads(out)["a"] == pytest.approx(0.55)


class TestSimulate:
    def test_golden_csv(self, capsys):
        code, out, _ = run(["simulate", str(GOLDEN)], capsys)
        assert code == 0
        assert out.encode() == (DATA / "c3_golden.csv").read_bytes()

    def test_golden_matches_independent_iteration(self):
        theta = build_C3(0.4).theta
        x = 0.5 * np.array([0.2, 0.3, 0.5])
        rows = list(csv.reader((DATA / "c3_golden.csv").open()))[1:]
        for r in rows:
            np.testing.assert_allclose([float(v) for v in r[1:4]], x, atol=1e-15)
            w = np.einsum("ipk,i,p->k", theta, x, x)
            x = 0.5 * w / w.sum()

    def test_json_equals_csv(self, capsys):
        _, text, _ = run(["simulate", str(GOLDEN)], capsys)
        _, js, _ = run(["simulate", str(GOLDEN), "--format", "json"], capsys)
        rows = list(csv.DictReader(io.StringIO(text)))
        data = json.loads(js)
        assert len(rows) == len(data) == 11
        for r, d in zip(rows, data):
            assert {k: float(v) for k, v in r.items()} == {k: float(v) for k, v in d.items()}

    def test_fixed_start_constant(self, tmp_path, capsys):
        cfg = u_config(n=3, j=1, l=3, u=[0, 0, 1])
        code, out, _ = run(["simulate", write(tmp_path, cfg), "--level", "normalized", "--steps", "5"], capsys)
        rows = list(csv.reader(io.StringIO(out)))[1:]
        assert code == 0 and all(r[1:] == ["0", "0", "1"] for r in rows)

    def test_levels_and_out(self, tmp_path, capsys):
        out_file = tmp_path / "t.csv"
        code, _, _ = run(["simulate", str(GOLDEN), "--level", "reduced", "--steps", "3", "--out", str(out_file)], capsys)
        lines = out_file.read_text().splitlines()
        assert code == 0 and lines[0] == "t,x_1,x_2,x_3" and len(lines) == 5

    def test_needs_initial(self, tmp_path, capsys):
        cfg = u_config()
        del cfg["initial"]
        assert run(["simulate", write(tmp_path, cfg)], capsys)[0] == 1


class TestFixedPoints:
    def test_c3(self, tmp_path, capsys):
        cfg = {"n": 3, "rate": {"a": 0.5}, "tensor": {"family": "C3", "c": 1.0}}
        code, out, _ = run(["fixed-points", write(tmp_path, cfg), "--json"], capsys)
        fps = json.loads(out)["fixed_points"]
        assert code == 0 and len(fps) == 1
        assert fps[0]["u"][2] == pytest.approx((3 - 5 ** 0.5) / 2, abs=1e-10)

    def test_u_attracting_vertex(self, tmp_path, capsys):
        code, out, _ = run(["fixed-points", write(tmp_path, u_config()), "--json"], capsys)
        fps = json.loads(out)["fixed_points"]
        attracting = [fp["u"] for fp in fps if fp["classification"] == "attracting"]
        assert attracting == [[0, 0, 1, 0]]

    def test_identity_message(self, tmp_path, capsys):
        cfg = {"n": 2, "rate": {"a": 0.5}, "tensor": {"family": "N2", "theta": [1, 1, 0]}}
        code, out, _ = run(["fixed-points", write(tmp_path, cfg)], capsys)
        assert code == 0 and "every point of [0, 0.5] is fixed" in out


class TestOmega:
    def test_u_fixed(self, tmp_path, capsys):
        code, out, _ = run(["omega", write(tmp_path, u_config())], capsys)
        rep = json.loads(out)
        assert code == 0 and rep["kind"] == "fixed_point"
        assert rep["points"][0] == pytest.approx([0, 0, 1, 0], abs=1e-10)

    def test_cycle(self, capsys):
        code, out, _ = run(["omega", str(GOLDEN)], capsys)
        rep = json.loads(out)
        assert code == 0 and rep["kind"] == "cycle" and rep["period"] == 2

    def test_undetermined_exit(self, tmp_path, capsys):
        cfg = u_config(j=2, l=2, u=[0.1, 0.2, 0.3, 0.4])
        code, out, _ = run(["omega", write(tmp_path, cfg), "--max-steps", "50"], capsys)
        assert code == 3 and json.loads(out)["kind"] == "undetermined"


class TestVerify:
    def test_selected(self, capsys):
        code, out, err = run(["verify", "L1", "L2N", "--json"], capsys)
        reps = json.loads(out)
        assert code == 0 and [r["id"] for r in reps] == ["L1", "L2N"] and all(r["pass"] for r in reps)
        assert "2/2" in err

    def test_seed_override(self, capsys):
        code, out, _ = run(["verify", "L2N", "--seed", "5", "--json"], capsys)
        assert code == 0 and json.loads(out)[0]["config"]["seed"] == 5

    def test_unknown(self, capsys):
        code, _, err = run(["verify", "BOGUS"], capsys)
        assert code == 4 and "BOGUS" in err


class TestSweep:
    def test_single_point(self, tmp_path, capsys):
        cfg = {"n": 2, "rate": {"a": 0.5}, "tensor": {"family": "N2", "theta": [0.5, 0.5, 0.5]},
               "initial": {"level": "normalized", "u": [0.3, 0.7]}}
        code, out, _ = run(["sweep", write(tmp_path, cfg), "--grid", "theta1=0.5", "--jobs", "1"], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and len(rows) == 1
        assert rows[0]["agree"] == "true" and float(rows[0]["u_1"]) == pytest.approx((3 - 5 ** 0.5) / 2, abs=1e-8)

    def test_c3_grid_all_cycles(self, capsys):
        code, out, _ = run(["sweep", str(GOLDEN), "--grid", "c=0.1:0.9:0.2", "--jobs", "2"], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == 0 and [float(r["c"]) for r in rows] == pytest.approx([0.1, 0.3, 0.5, 0.7, 0.9])
        assert all(r["simulated"] == "cycle" and r["period"] == "2" for r in rows)

    @pytest.mark.parametrize("grid", ["foo", "theta1=1:0:0.1", "nope=0.1", "c=abc"])
    def test_bad_grid(self, capsys, grid):
        assert run(["sweep", str(GOLDEN), "--grid", grid], capsys)[0] == 1


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "gonodyn.cli", "validate", str(GOLDEN)],
                         capture_output=True, text=True, check=False)
    assert res.returncode == 0 and json.loads(res.stdout)["valid"]
