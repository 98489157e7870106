import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from sketchreg.cli import dump_json, main, parse_experiment_config, run_experiment
from sketchreg.datagen import load_csv


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def result(out):
    doc = json.loads(out)
    assert doc["schema"] == "sketchreg/1"
    return doc["result"]


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.csv"
    p.write_text("1,0.5,2.0\n-1,1.0,-1.0\n1,0.0,0.0\n")
    return p


@pytest.fixture
def gen_file(tmp_path, capsys):
    p = tmp_path / "gen.csv"
    assert run(["gen", "--n", 200, "--d", 6, "--seed", 3, "--out", p], capsys)[0] == 0
    return p


class TestFit:
    def test_tiny(self, tiny, capsys):
        code, out, _ = run(["fit", "--data", tiny, "--lambda", 1], capsys)
        assert code == 0
        r = result(out)
        assert r["converged"] and r["grad_norm"] <= 1e-10

    def test_separable_two_points(self, tmp_path, capsys):
        p = tmp_path / "sep.csv"
        p.write_text("1,1.0\n1,2.0\n")
        code, out, err = run(["fit", "--data", p, "--lambda", 0], capsys)
        assert code == 2
        assert "separab" in err
        assert result(out)["message"] == "separable"

    def test_negative_lambda(self, tiny, capsys):
        assert run(["fit", "--data", tiny, "--lambda", -1], capsys)[0] == 1

    def test_missing_file_and_bad_data(self, tmp_path, capsys):
        assert run(["fit", "--data", tmp_path / "none.csv", "--lambda", 1], capsys)[0] == 1
        bad = tmp_path / "bad.csv"
        bad.write_text("1,0.5\n0,1.0\n")
        code, _, err = run(["fit", "--data", bad, "--lambda", 1], capsys)
        assert code == 1 and ":2" in err
        assert run(["fit", "--data", bad, "--lambda", 1, "--labels01"], capsys)[0] == 0

    def test_max_iters_exit(self, gen_file, capsys):
        assert run(["fit", "--data", gen_file, "--lambda", 1e-4, "--max-iters", 1], capsys)[0] == 2

    def test_out_file(self, tiny, tmp_path, capsys):
        out = tmp_path / "fit.json"
        assert run(["fit", "--data", tiny, "--lambda", 1, "--out", out], capsys)[0] == 0
        assert json.loads(out.read_text())["command"] == "fit"

    def test_unknown_command(self, capsys):
        assert run(["nope"], capsys)[0] == 1


class TestBounds:
    def test_pca(self, gen_file, capsys):
        code, out, _ = run(["bounds", "--data", gen_file, "--lambda", 1, "--sketch", "pca:3"], capsys)
        assert code == 0
        r = result(out)
        assert r["sandwich_ok"] is True
        assert r["lower"] - r["slack"] <= r["actual"] <= r["upper"] + r["slack"]

    def test_coord_full(self, gen_file, capsys):
        code, out, _ = run(["bounds", "--data", gen_file, "--lambda", 1, "--sketch", "coord:0,1,2,3,4,5"], capsys)
        assert code == 0
        assert result(out)["actual"] <= 1e-10

    def test_xent(self, gen_file, capsys):
        code, out, _ = run(["bounds", "--data", gen_file, "--lambda", 0.5, "--sketch", "rand:2:7", "--xent"], capsys)
        assert code == 0
        r = result(out)
        assert r["upper"] <= 2 / 0.5 * r["cross_entropy"]["H_total"] + 1e-8
        assert r["cross_entropy"]["chain_ok"] is True

    @pytest.mark.parametrize("sk", ["pca:x", "coord:9", "blah:2", "rand:2", "coord:0,0"])
    def test_bad_sketch(self, gen_file, capsys, sk):
        assert run(["bounds", "--data", gen_file, "--lambda", 1, "--sketch", sk], capsys)[0] == 1

    def test_lambda_zero_rejected(self, gen_file, capsys):
        assert run(["bounds", "--data", gen_file, "--lambda", 0, "--sketch", "pca:2"], capsys)[0] == 1


class TestMu:
    def test_symmetric(self, tmp_path, capsys):
        p = tmp_path / "sym.csv"
        p.write_text("1,1.0\n1,-1.0\n")
        code, out, _ = run(["mu", "--data", p], capsys)
        assert code == 0
        assert result(out)["mu"] == pytest.approx(1.0)

    def test_separable(self, tmp_path, capsys):
        p = tmp_path / "sep.csv"
        p.write_text("1,1.0\n1,2.0\n")
        code, out, _ = run(["mu", "--data", p, "--cross-check"], capsys)
        assert code == 0
        r = result(out)
        assert r["status"] == "infinite_separable" and r["mu"] == "inf"

    def test_cross_check(self, tmp_path, capsys):
        p = tmp_path / "g.csv"
        run(["gen", "--n", 60, "--d", 3, "--seed", 1, "--beta-norm", 0.5, "--out", p], capsys)
        code, out, _ = run(["mu", "--data", p, "--cross-check", "--beta", "--budget", 3], capsys)
        assert code == 0
        r = result(out)
        assert r["cross_check"]["agree"] is True
        assert len(r["beta_star"]) == 3


class TestLowrank:
    def test_full_rank_k(self, gen_file, capsys):
        code, out, _ = run(["lowrank", "--data", gen_file, "--k", 6], capsys)
        assert code == 0
        assert result(out)["gap"] == 0.0

    def test_random_beta(self, gen_file, capsys):
        code, out, _ = run(["lowrank", "--data", gen_file, "--k", 2, "--beta", "random:4"], capsys)
        assert code == 0
        r = result(out)
        assert r["gap"] <= r["budget"] and r["bound_ok"]

    def test_tightness(self, capsys):
        code, out, _ = run(["lowrank", "--tightness", "n=10", "x=50", "s=1"], capsys)
        assert code == 0
        assert result(out)["ratio"] >= 0.99

    def test_bad_args(self, gen_file, capsys):
        assert run(["lowrank", "--data", gen_file], capsys)[0] == 1
        assert run(["lowrank", "--data", gen_file, "--k", 2, "--beta", "rand"], capsys)[0] == 1
        assert run(["lowrank", "--tightness", "q=1"], capsys)[0] == 1


class TestGen:
    def test_deterministic_bytes(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            assert run(["gen", "--n", 30, "--d", 3, "--seed", 5, "--out", p], capsys)[0] == 0
        assert a.read_bytes() == b.read_bytes()
        assert load_csv(a).n == 30

    def test_standard_form_libsvm(self, tmp_path, capsys):
        p = tmp_path / "s.svm"
        assert run(["gen", "--n", 10, "--d", 2, "--standard-form", "--format", "libsvm", "--out", p], capsys)[0] == 0
        assert all(line.split()[0] == "-1" for line in p.read_text().splitlines())

    def test_bad_covariance(self, tmp_path, capsys):
        p = tmp_path / "x.csv"
        assert run(["gen", "--n", 10, "--d", 2, "--covariance", "diag:1", "--out", p], capsys)[0] == 1
        assert run(["gen", "--n", 10, "--d", 2, "--covariance", "diag:1,4", "--out", p], capsys)[0] == 0


EXPERIMENT = {
    "dataset": {"generative": {"n": 120, "d": 6}},
    "lambdas": [0.1, 1.0, 10.0],
    "sketches": ["pca:3", "rand:2"],
    "seeds": [0, 1, 2, 3, 4],
}


class TestExperiment:
    def test_grid_and_determinism(self, tmp_path, capsys):
        cfg = tmp_path / "exp.yaml"
        cfg.write_text(yaml.safe_dump(EXPERIMENT))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(["experiment", "--config", cfg, "--out", a], capsys)[0] == 0
        assert run(["experiment", "--config", cfg, "--out", b], capsys)[0] == 0
        assert a.read_bytes() == b.read_bytes()
        rows = list(csv.DictReader(io.StringIO(a.read_text())))
        assert len(rows) == 30
        assert all(r["sandwich_ok"] == "true" for r in rows)
        keys = [(float(r["lambda"]), EXPERIMENT["sketches"].index(r["sketch"]), int(r["instance_id"][5:])) for r in rows]
        assert keys == sorted(keys)
        assert all(r["runtime_ms"] == "" for r in rows)

    def test_workers_match_serial(self):
        raw = dict(EXPERIMENT, seeds=[0, 1, 2], lambdas=[1.0])
        serial, _ = run_experiment(parse_experiment_config(raw))
        pooled, _ = run_experiment(parse_experiment_config(dict(raw, workers=2)))
        assert serial == pooled

    def test_file_dataset(self, tmp_path, gen_file):
        raw = {"dataset": {"path": str(gen_file)}, "lambdas": [1.0], "sketches": ["coord:0,1"], "seeds": [0, 1],
               "timing": True, "compute_mu": False}
        text, rows = run_experiment(parse_experiment_config(raw))
        parsed = list(csv.DictReader(io.StringIO(text)))
        assert [r["instance_id"] for r in parsed] == ["gen-s0", "gen-s1"]
        assert all(r["mu"] == "" and float(r["runtime_ms"]) >= 0 for r in parsed)

    @pytest.mark.parametrize(
        "patch,field",
        [
            ({"lambdas": []}, "lambdas"),
            ({"lambdas": [1, -2]}, "lambdas[1]"),
            ({"sketches": ["pca:6"]}, "sketches[0]"),
            ({"sketches": ["svd:2"]}, "sketches[0]"),
            ({"seeds": [1, "a"]}, "seeds[1]"),
            ({"dataset": {"generative": {"n": 0, "d": 3}}}, "dataset.generative.n"),
            ({"solver": {"grad_tol": 0}}, "solver.grad_tol"),
            ({"bogus": 1}, "bogus"),
            ({"workers": 0}, "workers"),
        ],
    )
    def test_malformed(self, tmp_path, capsys, patch, field):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text(yaml.safe_dump(dict(EXPERIMENT, **patch)))
        code, _, err = run(["experiment", "--config", cfg], capsys)
        assert code == 1
        assert f"config error: {field}:" in err

    def test_not_yaml(self, tmp_path, capsys):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("lambdas: [1, 2\n")
        assert run(["experiment", "--config", cfg], capsys)[0] == 1


def test_json_encoding():
    text = dump_json("x", {"a": np.float64(0.1), "b": float("inf"), "c": float("nan"), "d": np.arange(2)})
    doc = json.loads(text)
    assert doc["result"] == {"a": 0.1, "b": "inf", "c": None, "d": [0, 1]}
    v = 1 / 3
    assert json.loads(dump_json("x", {"v": v}))["result"]["v"] == v


def test_module_entry_point(tiny):
    proc = subprocess.run([sys.executable, "-m", "sketchreg", "fit", "--data", str(tiny), "--lambda", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "fit"
