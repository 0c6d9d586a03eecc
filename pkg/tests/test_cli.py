import json
from pathlib import Path

import numpy as np
import pytest

from nlobs.cli import _EXIT_BY_ERROR, main
from nlobs.errors import EmptyRegion, InfeasibleSamples, Unbounded

GOLDEN = Path(__file__).parent / "golden"


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    return code, json.loads(out) if out else None, err


@pytest.fixture
def design3(tmp_path, capsys):
    path = tmp_path / "design3.json"
    code, _, _ = run(
        capsys,
        "synthesize",
        "--builtin",
        "example3",
        "--rho",
        "0",
        "--beta",
        "-200",
        "--gamma",
        "-141",
        "--alpha",
        "70.6",
        "--out",
        str(path),
    )
    assert code == 0
    return path


@pytest.fixture
def full_obs_system(tmp_path):
    path = tmp_path / "sys.json"
    path.write_text(
        json.dumps(
            {
                "n": 2,
                "p": 2,
                "m": 0,
                "A": [[0.0, 1.0], [-1.0, 0.0]],
                "C": [[1.0, 0.0], [0.0, 1.0]],
                "phi": {"kind": "polynomial", "terms": []},
                "region": {"shape": "ball", "r": 2.0},
            }
        )
    )
    return path


class TestEstimate:
    def test_example3_rho_zero(self, capsys):
        code, rep, _ = run_json(
            capsys,
            "estimate",
            "--builtin",
            "example3",
            "--radius",
            "5.9372",
            "--pairs",
            "20000",
            "--seed",
            "7",
        )
        assert code == 0
        rho = rep["results"]["one_sided"]["value"]
        assert -1e-3 <= rho <= 1e-9
        assert rep["inputs"]["seed"] == 7
        assert rep["results"]["one_sided"]["provenance"] == "estimated"

    def test_example2_box(self, capsys):
        code, rep, _ = run_json(
            capsys, "estimate", "--builtin", "example2", "--box", "-1", "1"
        )
        assert code == 0
        assert -0.5 <= rep["results"]["one_sided"]["value"] <= -0.49

    def test_missing_file_exit2(self, capsys):
        code, out, err = run(capsys, "estimate", "--system", "/does/not/exist.json")
        assert code == 2
        assert "/does/not/exist.json" in err
        assert out == ""

    def test_pair_floor_exit2(self, capsys):
        code, _, _ = run(capsys, "estimate", "--builtin", "example1", "--pairs", "50")
        assert code == 2

    def test_default_seed_echoed(self, capsys):
        code, rep, _ = run_json(
            capsys, "estimate", "--builtin", "example1", "--pairs", "200"
        )
        assert code == 0
        assert rep["inputs"]["seed"] == 42


class TestSynthesize:
    def test_worked_example(self, capsys, tmp_path):
        out_path = tmp_path / "d.json"
        code, rep, _ = run_json(
            capsys,
            "synthesize",
            "--builtin",
            "example3",
            "--rho",
            "0",
            "--beta",
            "-200",
            "--gamma",
            "-141",
            "--alpha",
            "70.6",
            "--out",
            str(out_path),
        )
        assert code == 0
        assert rep["results"]["L"]["value"] == [[-1.0], [1.0]]
        design = json.loads(out_path.read_text())
        assert set(design) == {"L", "alpha", "lambda", "rho", "beta", "gamma"}
        assert design["L"] == [[-1.0], [1.0]]
        assert 0.999799 < design["lambda"] < 1.0

    def test_structural_stop_exit4(self, capsys):
        code, out, err = run(
            capsys,
            "synthesize",
            "--builtin",
            "example3",
            "--rho",
            "0",
            "--beta",
            "0",
            "--gamma",
            "-1",
        )
        assert code == 4
        assert "beta" in err

    def test_default_alpha_one(self, capsys, full_obs_system):
        code, rep, _ = run_json(
            capsys,
            "synthesize",
            "--system",
            str(full_obs_system),
            "--rho",
            "-1",
            "--beta",
            "-3",
            "--gamma",
            "-1",
        )
        assert code == 0
        assert rep["results"]["alpha"]["value"] == 1.0

    def test_infeasible_alpha_exit5(self, capsys):
        code, _, err = run(
            capsys,
            "synthesize",
            "--builtin",
            "example3",
            "--rho",
            "0",
            "--beta",
            "-1",
            "--gamma",
            "-1",
            "--alpha",
            "1",
        )
        assert code == 5
        assert "alpha" in err


class TestAnalyze:
    def test_worked_example(self, capsys, design3):
        code, rep, _ = run_json(
            capsys, "analyze", "--builtin", "example3", "--design", str(design3)
        )
        assert code == 0
        scal = rep["results"]["lyapunov_scalar"]["value"]
        assert abs(scal - (-0.4187)) <= 1e-3
        assert rep["results"]["corollary1"]["overall"] is True
        assert rep["results"]["theorem1"]["overall"] is True

    def test_identity_mode(self, capsys, design3):
        code, rep, _ = run_json(
            capsys,
            "analyze",
            "--builtin",
            "example3",
            "--design",
            str(design3),
            "--mode",
            "identity",
        )
        assert code == 0
        idp = rep["results"]["identity_P"]
        assert idp["sufficient"] is False
        assert idp["max_real_eig"] == pytest.approx(1.0)
        assert "corollary1" not in rep["results"]

    def test_tampered_lambda(self, capsys, design3, tmp_path):
        tampered = json.loads(design3.read_text())
        tampered["lambda"] = 0.5
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(tampered))
        code, rep, _ = run_json(
            capsys, "analyze", "--builtin", "example3", "--design", str(bad)
        )
        assert code == 0
        cor1 = rep["results"]["corollary1"]
        margins = {i["label"]: i["margin"] for i in cor1["inequalities"]}
        assert margins["cor1.lambda"] < 0
        assert cor1["overall"] is False

    def test_malformed_design_exit2(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"L": [[1.0], [0.0]]}))
        code, _, err = run(
            capsys, "analyze", "--builtin", "example3", "--design", str(bad)
        )
        assert code == 2
        assert "alpha" in err


class TestSimulate:
    def test_worked_example_defaults(self, capsys, design3, tmp_path):
        trace = tmp_path / "trace.csv"
        code, rep, _ = run_json(
            capsys,
            "simulate",
            "--builtin",
            "example3",
            "--design",
            str(design3),
            "--x0",
            "0.3",
            "0.4",
            "--xhat0",
            "-0.5",
            "0.2",
            "--out",
            str(trace),
        )
        assert code == 0
        assert rep["results"]["final_error_ratio"]["value"] <= 1e-3
        header = trace.read_text().split("\n", 1)[0]
        assert header == "t,x1,x2,xhat1,xhat2,err_norm,V"

    def test_stiff_implicit_euler(self, capsys, tmp_path):
        design = tmp_path / "d1.json"
        design.write_text(
            json.dumps(
                {"L": [[1.0]], "alpha": 1.0, "lambda": 0.5, "rho": 0.0,
                 "beta": -1.0, "gamma": 0.0}
            )
        )
        trace = tmp_path / "trace.csv"
        code, rep, err = run_json(
            capsys,
            "simulate",
            "--builtin",
            "example1",
            "--design",
            str(design),
            "--x0",
            "10",
            "--xhat0",
            "8",
            "--t1",
            "5",
            "--h",
            "0.25",
            "--method",
            "implicit_euler",
            "--out",
            str(trace),
        )
        assert code == 0
        assert "outside the operational region" in err
        rows = trace.read_text().strip().split("\n")[1:]
        xs = np.array([float(r.split(",")[1]) for r in rows])
        assert np.all(np.isfinite(xs)) and abs(xs[-1]) < abs(xs[0])

    def test_rk4_blowup_exit6(self, capsys, tmp_path):
        design = tmp_path / "d1.json"
        design.write_text(
            json.dumps(
                {"L": [[1.0]], "alpha": 1.0, "lambda": 0.5, "rho": 0.0,
                 "beta": -1.0, "gamma": 0.0}
            )
        )
        code, _, err = run(
            capsys,
            "simulate",
            "--builtin",
            "example1",
            "--design",
            str(design),
            "--x0",
            "10",
            "--xhat0",
            "8",
            "--t1",
            "5",
            "--h",
            "0.25",
            "--out",
            str(tmp_path / "t.csv"),
        )
        assert code == 6
        assert "non-finite" in err

    def test_negative_step_exit2(self, capsys, design3, tmp_path):
        code, _, err = run(
            capsys,
            "simulate",
            "--builtin",
            "example3",
            "--design",
            str(design3),
            "--x0",
            "0.3",
            "0.4",
            "--xhat0",
            "0.0",
            "0.0",
            "--h",
            "-1",
            "--out",
            str(tmp_path / "t.csv"),
        )
        assert code == 2
        assert "--h" in err


class TestReproduce:
    def test_all_rows_ok(self, capsys):
        code, rep, _ = run_json(capsys, "reproduce")
        assert code == 0
        assert rep["results"]["mismatches"] == 0
        statuses = {r["status"] for r in rep["results"]["rows"]}
        assert statuses == {"ok", "context"}
        literature = [
            r for r in rep["results"]["rows"] if "1.0324" in str(r["quantity"])
        ]
        assert literature[0]["provenance"] == "literature, not reproduced"

    def test_human_table(self, capsys):
        code, out, _ = run(capsys, "reproduce")
        assert code == 0
        assert "region_radius" in out and "status" in out


class TestContract:
    def test_exit3_classes_mapped(self):
        for exc in (EmptyRegion("x"), InfeasibleSamples("x"), Unbounded("x")):
            code = next(
                code for classes, code in _EXIT_BY_ERROR if isinstance(exc, classes)
            )
            assert code == 3

    def test_stdout_carries_only_report(self, capsys, design3):
        code, out, err = run(
            capsys,
            "simulate",
            "--builtin",
            "example3",
            "--design",
            str(design3),
            "--x0",
            "9",
            "0",
            "--xhat0",
            "0",
            "0",
            "--t1",
            "0.1",
            "--out",
            "/tmp/nlobs_test_trace.csv",
        )
        assert code == 0
        assert "warning" not in out
        assert "outside the operational region" in err

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0


def _key_tree(obj, prefix=""):
    paths = []
    if isinstance(obj, dict):
        for k, v in sorted(obj.items()):
            p = f"{prefix}.{k}" if prefix else k
            paths.append(f"{p}:{type(v).__name__}")
            paths.extend(_key_tree(v, p))
    elif isinstance(obj, list) and obj and isinstance(obj[0], dict):
        paths.extend(_key_tree(obj[0], prefix + "[]"))
    return paths


class TestGoldenSchemas:
    def test_estimate_schema(self, capsys):
        _, rep, _ = run_json(
            capsys, "estimate", "--builtin", "example1", "--pairs", "400",
            "--points", "64",
        )
        want = json.loads((GOLDEN / "estimate_schema.json").read_text())
        assert _key_tree(rep) == want

    def test_synthesize_schema(self, capsys):
        _, rep, _ = run_json(
            capsys, "synthesize", "--builtin", "example3", "--rho", "0",
            "--beta", "-200", "--gamma", "-141", "--alpha", "70.6",
        )
        want = json.loads((GOLDEN / "synthesize_schema.json").read_text())
        assert _key_tree(rep) == want

    def test_reproduce_schema(self, capsys):
        _, rep, _ = run_json(capsys, "reproduce")
        want = json.loads((GOLDEN / "reproduce_schema.json").read_text())
        assert _key_tree(rep) == want
