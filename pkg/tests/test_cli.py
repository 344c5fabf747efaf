"""End-to-end command-line tests run through ``python -m varimp``."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from varimp.data import from_arrays, write_csv, write_roles


def run_cli(args, cwd, env_extra=None):
    env = dict(os.environ)
    env.pop("VIMP_THREADS", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run([sys.executable, "-m", "varimp", *args],
                          capture_output=True, text=True, cwd=cwd, env=env)


def _write_dataset(tmp_path, name, ds):
    data = tmp_path / f"{name}.csv"
    roles = tmp_path / f"{name}.roles"
    write_csv(ds, data)
    write_roles(ds, roles)
    return str(data), str(roles)


@pytest.fixture(scope="module")
def signal_files(tmp_path_factory):
    """Small dataset with one strong predictor and two null ones."""
    tmp = tmp_path_factory.mktemp("cli_signal")
    rng = np.random.default_rng(0)
    n = 120
    x1 = rng.standard_normal(n)
    ds = from_arrays(("x1", "x2", "g"),
                     [x1, rng.standard_normal(n),
                      np.array(list("ab"))[rng.integers(0, 2, size=n)]],
                     ["n", "n", "c"],
                     3.0 * x1 + rng.standard_normal(n))
    return _write_dataset(tmp, "signal", ds)


@pytest.fixture(scope="module")
def missing_files(tmp_path_factory):
    """Dataset where every predictor has some missing values."""
    tmp = tmp_path_factory.mktemp("cli_missing")
    rng = np.random.default_rng(1)
    n = 100
    x1 = rng.standard_normal(n)
    x2 = rng.standard_normal(n)
    g = np.array(list("abc"))[rng.integers(0, 3, size=n)].astype(object)
    y = 2.0 * x1 + rng.standard_normal(n)
    x1[rng.random(n) < 0.15] = np.nan
    x2[rng.random(n) < 0.15] = np.nan
    g[rng.random(n) < 0.15] = None
    lines = ["x1,x2,g,y"]
    for i in range(n):
        cells = ["NA" if np.isnan(x1[i]) else repr(float(x1[i])),
                 "NA" if np.isnan(x2[i]) else repr(float(x2[i])),
                 "NA" if g[i] is None else g[i],
                 repr(float(y[i]))]
        lines.append(",".join(cells))
    data = tmp / "miss.csv"
    roles = tmp / "miss.roles"
    data.write_text("\n".join(lines) + "\n")
    roles.write_text("x1 n\nx2 n\ng c\ny d\n")
    return str(data), str(roles)


class TestScore:
    def test_writes_outputs_and_flags_signal(self, signal_files, tmp_path):
        data, roles = signal_files
        res = run_cli(["score", data, roles, "--b", "30", "--seed", "5",
                       "--out-dir", str(tmp_path)], cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        doc = json.loads((tmp_path / "vi.json").read_text())
        assert doc["B"] == 30
        by_name = {row["name"]: row for row in doc["variables"]}
        assert by_name["x1"]["important"] is True
        assert "variables flagged important" in res.stdout
        csv_lines = (tmp_path / "vi.csv").read_text().strip().split("\n")
        assert csv_lines[0] == "name,v,v_bar,VI,normalized,important"
        assert len(csv_lines) == 1 + 3

    def test_byte_identical_reruns(self, signal_files, tmp_path):
        data, roles = signal_files
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            out.mkdir()
            res = run_cli(["score", data, roles, "--b", "25", "--seed", "9",
                           "--out-dir", str(out)], cwd=tmp_path)
            assert res.returncode == 0, res.stderr
            outs.append((out / "vi.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_alpha_monotone_flag_count(self, signal_files, tmp_path):
        data, roles = signal_files
        counts = {}
        for alpha in ("0.05", "0.01"):
            out = tmp_path / alpha
            out.mkdir()
            res = run_cli(["score", data, roles, "--b", "40", "--seed", "3",
                           "--alpha", alpha, "--out-dir", str(out)],
                          cwd=tmp_path)
            assert res.returncode == 0, res.stderr
            counts[alpha] = json.loads((out / "vi.json").read_text())["m"]
        assert counts["0.01"] <= counts["0.05"]

    def test_missing_values_score_without_imputation(self, missing_files,
                                                     tmp_path):
        data, roles = missing_files
        res = run_cli(["score", data, roles, "--b", "20",
                       "--out-dir", str(tmp_path)], cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        doc = json.loads((tmp_path / "vi.json").read_text())
        assert len(doc["variables"]) == 3
        for row in doc["variables"]:
            assert np.isfinite(row["VI"])

    def test_missing_file_exit_one(self, tmp_path):
        res = run_cli(["score", "nope.csv", "nope.roles",
                       "--out-dir", str(tmp_path)], cwd=tmp_path)
        assert res.returncode == 1
        assert "error:" in res.stderr

    def test_bad_row_exit_two_names_location(self, tmp_path):
        data = tmp_path / "bad.csv"
        data.write_text("x1,y\n1.0,2.0\noops,3.0\n4.0,5.0\n")
        roles = tmp_path / "bad.roles"
        roles.write_text("x1 n\ny d\n")
        res = run_cli(["score", str(data), str(roles),
                       "--out-dir", str(tmp_path)], cwd=tmp_path)
        assert res.returncode == 2
        assert "row 3" in res.stderr
        assert "x1" in res.stderr


class TestPermtest:
    def test_verdict_line_and_outputs(self, signal_files, tmp_path):
        data, roles = signal_files
        res = run_cli(["permtest", data, roles, "--j", "4",
                       "--out-dir", str(tmp_path)], cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        assert "overlap_verdict=" in res.stdout
        lines = (tmp_path / "permbias.csv").read_text().strip().split("\n")
        assert lines[0] == "variable,mean,se"
        assert len(lines) == 1 + 3 + 1
        assert lines[-1].startswith("# overlap_verdict=")

    def test_j_below_two_rejected(self, signal_files, tmp_path):
        data, roles = signal_files
        res = run_cli(["permtest", data, roles, "--j", "1",
                       "--out-dir", str(tmp_path)], cwd=tmp_path)
        assert res.returncode == 2

    def test_cart_favors_many_level_categorical(self, tmp_path):
        # under permuted responses a 10-level factor collects more
        # impurity reduction than a binary one, so the audit fails
        rng = np.random.default_rng(2)
        n = 200
        ds = from_arrays(("b1", "c1"),
                         [np.array(["u", "v"])[rng.integers(0, 2, size=n)],
                          np.array([str(v) for v in
                                    rng.integers(1, 11, size=n)])],
                         ["c", "c"], rng.standard_normal(n))
        data, roles = _write_dataset(tmp_path, "nullcat", ds)
        res = run_cli(["permtest", data, roles, "--j", "60",
                       "--method", "cart", "--out-dir", str(tmp_path)],
                      cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        assert "overlap_verdict=false" in res.stdout
        rows = {}
        for line in (tmp_path / "permbias.csv").read_text().split("\n")[1:3]:
            name, mean, se = line.split(",")
            rows[name] = float(mean)
        assert rows["c1"] > rows["b1"]


class TestSimbench:
    def test_e0_cart_smoke(self, tmp_path):
        res = run_cli(["simbench", "--model", "E0", "--trials", "10",
                       "--n", "150", "--method", "cart",
                       "--out-dir", str(tmp_path)], cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        summary = (tmp_path / "summary.csv").read_text().strip().split("\n")
        assert len(summary) == 1 + 11 + 1
        trials = (tmp_path / "trials.csv").read_text().strip().split("\n")
        assert len(trials) == 1 + 10 * 11

    def test_e5_guide_rows_and_reproducibility(self, tmp_path):
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            out.mkdir()
            res = run_cli(["simbench", "--model", "E5", "--trials", "3",
                           "--n", "150", "--b", "10", "--seed", "21",
                           "--out-dir", str(out)], cwd=tmp_path)
            assert res.returncode == 0, res.stderr
            outs.append((out / "summary.csv").read_bytes())
        assert outs[0] == outs[1]
        names = [line.split(",")[0] for line in
                 outs[0].decode().strip().split("\n")[1:-1]]
        assert names == ["B1", "B2", "C1", "C2", "N1", "N2", "N3", "N4",
                         "S1", "S2", "S3"]

    def test_trials_flag_required(self, tmp_path):
        res = run_cli(["simbench", "--model", "E0",
                       "--out-dir", str(tmp_path)], cwd=tmp_path)
        assert res.returncode != 0


class TestPredvalue:
    def test_kfold_rows_and_vi_correlations(self, signal_files, tmp_path):
        data, roles = signal_files
        res = run_cli(["score", data, roles, "--b", "25",
                       "--out-dir", str(tmp_path)], cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        res = run_cli(["predvalue", data, roles, "--cv", "kfold:5",
                       "--trees", "10", "--vi", str(tmp_path / "vi.csv"),
                       "--out-dir", str(tmp_path)], cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        lines = (tmp_path / "predvalue.csv").read_text().strip().split("\n")
        assert lines[1] == "variable,S_j,S_minus_j,MPV,CPV"
        assert len(lines) == 2 + 3 + 2
        cors = {}
        for line in lines[-2:]:
            key, value = line.lstrip("# ").split("=")
            cors[key] = float(value)
        assert -1.0 <= cors["cor_mpv"] <= 1.0
        assert -1.0 <= cors["cor_cpv"] <= 1.0
        assert "cor(VI, MPV)" in res.stdout

    def test_loo_on_thirty_rows(self, tmp_path):
        rng = np.random.default_rng(3)
        x = rng.standard_normal(30)
        ds = from_arrays(("x1", "x2"), [x, rng.standard_normal(30)],
                         ["n", "n"], 2.0 * x + rng.standard_normal(30))
        data, roles = _write_dataset(tmp_path, "tiny", ds)
        res = run_cli(["predvalue", data, roles, "--cv", "loo",
                       "--trees", "5", "--out-dir", str(tmp_path)],
                      cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        meta = (tmp_path / "predvalue.csv").read_text().split("\n")[0]
        assert "scheme=loo" in meta

    def test_bad_cv_scheme_exit_two(self, signal_files, tmp_path):
        data, roles = signal_files
        res = run_cli(["predvalue", data, roles, "--cv", "montecarlo",
                       "--out-dir", str(tmp_path)], cwd=tmp_path)
        assert res.returncode == 2
        assert "cv" in res.stderr


class TestManifest:
    def test_fields_and_digests(self, signal_files, tmp_path):
        data, roles = signal_files
        res = run_cli(["score", data, roles, "--b", "20", "--seed", "11",
                       "--out-dir", str(tmp_path)], cwd=tmp_path)
        assert res.returncode == 0, res.stderr
        doc = json.loads((tmp_path / "manifest.json").read_text())
        assert doc["command"] == "score"
        assert doc["seed"] == 11
        assert doc["flags"]["b"] == 20
        assert doc["backend"] in ("compiled", "pure-python")
        assert doc["threads"] >= 1
        assert doc["wall_time_s"] >= 0
        assert set(doc["inputs"]) == {data, roles}
        import hashlib
        with open(data, "rb") as fh:
            assert doc["inputs"][data] == hashlib.sha256(
                fh.read()).hexdigest()
        from varimp import __version__
        assert doc["version"] == __version__

    def test_threads_env_fallback(self, signal_files, tmp_path):
        data, roles = signal_files
        res = run_cli(["score", data, roles, "--b", "20",
                       "--out-dir", str(tmp_path)], cwd=tmp_path,
                      env_extra={"VIMP_THREADS": "3"})
        assert res.returncode == 0, res.stderr
        doc = json.loads((tmp_path / "manifest.json").read_text())
        assert doc["threads"] == 3


class TestVersion:
    def test_version_flag(self, tmp_path):
        res = run_cli(["--version"], cwd=tmp_path)
        assert res.returncode == 0
        from varimp import __version__
        assert __version__ in res.stdout
