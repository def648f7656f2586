import csv
import json

import numpy as np
import pytest

from selmod import cli
from selmod import families as F
from selmod import mechanisms as M
from selmod.errors import SchemaError
from selmod.likelihood import Dataset
from selmod.modelspec import ModelSpec, parse_model_spec
from selmod.simulate import SimConfig, simulate

TOY_SPEC = """
family        = bernoulli
link          = logit
mechanism     = probit-std
response_col  = y
selection_col = d
x_cols        = x1
w_cols        = w1
"""

TOY_CSV = """d,y,x1,w1
1,1,0.5,-0.2
0,,1.5,0.3
1,0,-0.7,0.9
"""


@pytest.fixture
def toy(tmp_path):
    spec_path = tmp_path / "model.spec"
    spec_path.write_text(TOY_SPEC)
    data_path = tmp_path / "data.csv"
    data_path.write_text(TOY_CSV)
    return data_path, spec_path


class TestModelSpecParsing:
    def test_round_trip_fields(self):
        spec = parse_model_spec(TOY_SPEC)
        assert spec.family == "bernoulli" and spec.mechanism == "probit-std"
        assert spec.x_cols == ("x1",) and spec.w_cols == ("w1",)
        assert spec.ci_level == 0.95 and spec.x_intercept and spec.w_intercept

    def test_comments_and_blank_lines(self):
        spec = parse_model_spec(TOY_SPEC + "\n# comment\n\nci_level = 0.9\n")
        assert spec.ci_level == 0.9

    def test_unknown_field(self):
        with pytest.raises(SchemaError, match="unknown spec fields"):
            parse_model_spec(TOY_SPEC + "bogus = 1\n")

    def test_missing_required(self):
        with pytest.raises(SchemaError, match="missing the required field"):
            parse_model_spec("family = poisson\n")

    def test_duplicate_key(self):
        with pytest.raises(SchemaError, match="duplicate"):
            parse_model_spec(TOY_SPEC + "family = poisson\n")

    def test_mgf_needs_nonnegative_family(self):
        with pytest.raises(SchemaError, match="nonnegative-support"):
            ModelSpec(family="normal", mechanism="expn-mgf")

    def test_column_disjointness(self):
        with pytest.raises(SchemaError, match="disjoint"):
            ModelSpec(family="poisson", mechanism="probit-std",
                      response_col="y", selection_col="d",
                      x_cols=("y", "x1"), w_cols=("w1",))

    def test_grid_parse(self):
        spec = parse_model_spec(TOY_SPEC + "grid = -1, 0, 1\n")
        assert spec.grid == (-1.0, 0.0, 1.0)


class TestLoadDataset:
    def test_toy_file(self, toy):
        data_path, spec_path = toy
        spec = cli.load_model_spec(spec_path)
        data = cli.load_dataset(data_path, spec)
        assert data.n == 3
        assert np.isnan(data.y[1]) and data.y[0] == 1.0
        assert data.p == 2  # intercept prepended

    def test_strict_rejects_response_on_censored_row(self, tmp_path, toy):
        _, spec_path = toy
        bad = tmp_path / "bad.csv"
        bad.write_text("d,y,x1,w1\n0,3,0.5,-0.2\n1,1,0.1,0.2\n")
        spec = cli.load_model_spec(spec_path)
        with pytest.raises(SchemaError, match="row 2"):
            cli.load_dataset(bad, spec)
        with pytest.warns(UserWarning, match="row 2"):
            data = cli.load_dataset(bad, spec, lenient=True)
        assert np.isnan(data.y[0])

    def test_missing_response_on_selected_row(self, tmp_path, toy):
        _, spec_path = toy
        bad = tmp_path / "bad.csv"
        bad.write_text("d,y,x1,w1\n1,,0.5,-0.2\n")
        with pytest.raises(SchemaError, match="empty response"):
            cli.load_dataset(bad, cli.load_model_spec(spec_path))

    def test_missing_column(self, tmp_path, toy):
        _, spec_path = toy
        bad = tmp_path / "bad.csv"
        bad.write_text("d,y,x1\n1,1,0.5\n")
        with pytest.raises(SchemaError, match="missing columns"):
            cli.load_dataset(bad, cli.load_model_spec(spec_path))

    def test_non_binary_selection(self, tmp_path, toy):
        _, spec_path = toy
        bad = tmp_path / "bad.csv"
        bad.write_text("d,y,x1,w1\n2,1,0.5,0.3\n")
        with pytest.raises(SchemaError, match="0/1"):
            cli.load_dataset(bad, cli.load_model_spec(spec_path))


class TestRoundTrip:
    def test_simulate_write_load_identical(self, tmp_path):
        cfg = SimConfig(n=200, family=F.poisson(), mechanism=M.mechanism("probit-std"),
                        beta_true=[0.7, 0.3], gamma_true=[0.2, -0.4],
                        alpha_true=-0.5, seed=42)
        data = simulate(cfg)
        path = tmp_path / "sim.csv"
        cli.write_dataset_csv(path, data)
        spec = ModelSpec(family="poisson", mechanism="probit-std",
                         response_col="y", selection_col="d",
                         x_cols=("x1",), w_cols=("w1",))
        back = cli.load_dataset(path, spec)
        assert np.array_equal(back.d, data.d)
        assert np.array_equal(back.y, data.y, equal_nan=True)
        assert np.array_equal(back.X, data.X)
        assert np.array_equal(back.W, data.W)


class TestCommands:
    def _write_sim_inputs(self, tmp_path, n=500, seed=42, mechanism="probit-std",
                          family="bernoulli", alpha=-1.2):
        cfg = tmp_path / "sim.cfg"
        cfg.write_text(
            f"n = {n}\nfamily = {family}\nmechanism = {mechanism}\n"
            f"alpha = {alpha}\nbeta = 0.3, 0.5\ngamma = 0.2, -0.4\nseed = {seed}\n"
        )
        spec = tmp_path / "model.spec"
        spec.write_text(
            f"family = {family}\nmechanism = {mechanism}\n"
            "response_col = y\nselection_col = d\nx_cols = x1\nw_cols = w1\n"
        )
        return cfg, spec

    def test_simulate_deterministic(self, tmp_path):
        cfg, _ = self._write_sim_inputs(tmp_path)
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli.main(["simulate", str(cfg), "--out", str(out1)]) == 0
        assert cli.main(["simulate", str(cfg), "--out", str(out2)]) == 0
        assert out1.read_text() == out2.read_text()

    def test_simulate_empty(self, tmp_path):
        cfg, _ = self._write_sim_inputs(tmp_path, n=0)
        out = tmp_path / "empty.csv"
        assert cli.main(["simulate", str(cfg), "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines == ["d,y,x1,w1"]

    def test_fit_report(self, tmp_path):
        cfg, spec = self._write_sim_inputs(tmp_path)
        data = tmp_path / "data.csv"
        report = tmp_path / "report.json"
        curve = tmp_path / "curve.csv"
        assert cli.main(["simulate", str(cfg), "--out", str(data)]) == 0
        code = cli.main(["fit", str(data), str(spec), "--out", str(report),
                         "--profile-out", str(curve)])
        assert code == 0
        doc = json.loads(report.read_text())
        assert doc["boundary_diagnostic"] == "interior"
        assert doc["alpha_ci"]["lower"] < doc["alpha_hat"] < doc["alpha_ci"]["upper"]
        assert doc["response_model"]["names"] == ["one", "x1"]
        assert len(doc["response_model"]["estimate"]) == 2
        assert doc["data_sha256"] and doc["spec_sha256"]
        rows = list(csv.DictReader(curve.open()))
        rel = [float(r["rel_loglik"]) for r in rows]
        assert max(rel) == 0.0

    def test_fit_deterministic(self, tmp_path):
        cfg, spec = self._write_sim_inputs(tmp_path, n=300)
        data = tmp_path / "data.csv"
        cli.main(["simulate", str(cfg), "--out", str(data)])
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        cli.main(["fit", str(data), str(spec), "--out", str(r1)])
        cli.main(["fit", str(data), str(spec), "--out", str(r2)])
        assert r1.read_text() == r2.read_text()

    def test_profile_auto_curve_is_unimodal(self, tmp_path):
        cfg, spec = self._write_sim_inputs(tmp_path, n=400)
        data = tmp_path / "data.csv"
        cli.main(["simulate", str(cfg), "--out", str(data)])
        out = tmp_path / "curve.csv"
        assert cli.main(["profile", str(data), str(spec), "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        rel = np.array([float(r["rel_loglik"]) for r in rows])
        assert rel.max() == 0.0
        # concave shape: rises to the vertex, falls after it
        k = int(rel.argmax())
        assert np.all(np.diff(rel[: k + 1]) >= -1e-9)
        assert np.all(np.diff(rel[k:]) <= 1e-9)

    def test_profile_explicit_alphas(self, tmp_path):
        cfg, spec = self._write_sim_inputs(tmp_path, n=300)
        data = tmp_path / "data.csv"
        cli.main(["simulate", str(cfg), "--out", str(data)])
        out = tmp_path / "curve.csv"
        code = cli.main(["profile", str(data), str(spec),
                         "--alphas=-2,-1.2,-0.5,0,0.5", "--out", str(out)])
        assert code == 0
        rows = list(csv.DictReader(out.open()))
        assert [r["alpha"] for r in rows] == ["-2", "-1.2", "-0.5", "0", "0.5"]
        rel = [float(r["rel_loglik"]) for r in rows if r["status"] == "ok"]
        assert max(rel) == 0.0

    def test_profile_failed_point_sentinel(self, tmp_path):
        cfg, spec = self._write_sim_inputs(tmp_path, n=200, family="poisson",
                                           mechanism="expn-mgf", alpha=0.2)
        data = tmp_path / "data.csv"
        cli.main(["simulate", str(cfg), "--out", str(data)])
        out = tmp_path / "curve.csv"
        with pytest.warns(RuntimeWarning):
            code = cli.main(["profile", str(data), str(spec),
                             "--alphas=0,0.3,-5", "--out", str(out)])
        assert code == 0
        rows = {r["alpha"]: r for r in csv.DictReader(out.open())}
        assert rows["-5"]["status"] == "failed" and rows["-5"]["rel_loglik"] == ""
        assert rows["0"]["status"] == "ok"

    def test_schema_error_exit_code(self, tmp_path, toy):
        data_path, spec_path = toy
        bad = tmp_path / "bad.csv"
        bad.write_text("d,y\n1,1\n")
        assert cli.main(["fit", str(bad), str(spec_path)]) == 2

    def test_missing_file_exit_code(self, toy):
        _, spec_path = toy
        assert cli.main(["fit", "/nonexistent.csv", str(spec_path)]) == 2

    def test_degenerate_grid_matches_glm(self, tmp_path):
        from selmod import glm

        cfg, _ = self._write_sim_inputs(tmp_path, n=400)
        data_path = tmp_path / "data.csv"
        cli.main(["simulate", str(cfg), "--out", str(data_path)])
        spec_path = tmp_path / "pinned.spec"
        spec_path.write_text(
            "family = bernoulli\nmechanism = probit-std\n"
            "response_col = y\nselection_col = d\nx_cols = x1\nw_cols = w1\n"
            "grid = 0\n"
        )
        report = tmp_path / "report.json"
        assert cli.main(["fit", str(data_path), str(spec_path),
                         "--out", str(report)]) == 0
        doc = json.loads(report.read_text())
        spec = cli.load_model_spec(spec_path)
        data = cli.load_dataset(data_path, spec)
        sel = data.d == 1
        gy = glm.fit_glm(data.y[sel], data.X[sel], F.bernoulli())
        gd = glm.fit_selection_glm(data.d, data.W, "stdnormal")
        assert doc["alpha_hat"] == 0.0
        assert np.allclose(doc["response_model"]["estimate"], gy.coef, atol=1e-6)
        assert np.allclose(doc["selection_model"]["estimate"], gd.coef, atol=1e-6)
