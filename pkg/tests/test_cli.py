import json
import subprocess
import sys

import numpy as np
import pytest

from berhu import __version__
from berhu.cli import main


@pytest.fixture
def tiny(data_dir):
    return str(data_dir / "tiny.csv")


@pytest.fixture
def golden(data_dir):
    return json.loads((data_dir / "tiny_golden.json").read_text())


def _fit(tmp_path, tiny, *extra):
    out = tmp_path / "fit"
    code = main(["fit", "--input", tiny, "--response", "y", "--output", str(out), *extra])
    return code, json.loads((out / "result.json").read_text())


def test_fit_ols_golden(tmp_path, tiny, golden):
    code, doc = _fit(tmp_path, tiny, "--method", "OLS")
    assert code == 0
    f = doc["result"]["fit"]
    assert f["intercept_original_scale"] == pytest.approx(golden["intercept"], rel=1e-10)
    np.testing.assert_allclose(f["beta"], golden["beta"], rtol=1e-10)
    assert doc["config"]["method"] == "OLS"
    assert "output" not in doc["config"]


def test_fit_berhu_zero_lambda_is_ols(tmp_path, tiny, golden):
    code, doc = _fit(tmp_path, tiny, "--method", "ad-Berhu", "--lam", "0")
    assert code == 0
    f = doc["result"]["fit"]
    np.testing.assert_allclose(f["beta"], golden["beta"], rtol=1e-6)
    assert doc["result"]["tuned"] is False


def test_fit_tuned_writes_all_files(tmp_path, tiny):
    code, doc = _fit(tmp_path, tiny, "--method", "Huber-ad-Berhu", "--grid-points", "8")
    assert code == 0
    assert {p.name for p in (tmp_path / "fit").iterdir()} == {"result.json", "result.txt", "timing.json"}
    assert doc["result"]["fit"]["converged"]
    assert doc["result"]["kkt"]["max_residual"] <= 1e-6


def test_fit_to_stdout(tiny, capsys):
    assert main(["fit", "--input", tiny, "--response", "y", "--method", "OLS"]) == 0
    assert "(intercept)" in capsys.readouterr().out


def test_unknown_method(tmp_path, tiny, capsys):
    out = tmp_path / "o"
    assert main(["fit", "--input", tiny, "--response", "y", "--method", "lasso9",
                 "--output", str(out)]) == 1
    assert "lasso9" in capsys.readouterr().err
    assert not out.exists()


def test_not_converged_exit(tmp_path, tiny):
    code, doc = _fit(tmp_path, tiny, "--method", "ad-Berhu", "--lam", "5", "--max-sweeps", "1")
    assert code == 2
    assert doc["result"]["fit"]["converged"] is False


def test_missing_response_column(tmp_path, tiny, capsys):
    out = tmp_path / "o"
    assert main(["fit", "--input", tiny, "--output", str(out)]) == 1
    assert "lpsa" in capsys.readouterr().err
    assert not out.exists()


@pytest.mark.parametrize("argv", [
    [],
    ["fit"],
    ["simulate", "--model", "7"],
    ["simulate", "--full-protocol", "--reps", "3"],
    ["fit", "--input", "x.csv", "--lam", "-1"],
    ["check", "--suites", "nonsense"],
    ["check", "--inject-fault", "alpha"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err


def test_simulate_deterministic(tmp_path):
    argv = ["simulate", "--model", "1", "--n", "50", "--reps", "2", "--methods", "ridge,ad-lasso",
            "--grid-points", "5", "--test-size", "100", "--seed", "4"]
    assert main(argv + ["--output", str(tmp_path / "a")]) == 0
    assert main(argv + ["--output", str(tmp_path / "b"), "--jobs", "2"]) == 0
    for name in ("report.json", "rpe_boxplot.csv", "beta1_boxplot.csv", "selection.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    sel = (tmp_path / "a" / "selection.csv").read_text().splitlines()
    assert sel[0].startswith("method,C,O,U")
    assert [row.split(",")[0] for row in sel[1:]] == ["ad-lasso"]


def _prostate_file(tmp_path, rng, n=30, drop=None):
    cols = ["lcavol", "lweight", "age", "lbph", "svi", "lcp", "gleason", "pgg45", "lpsa"]
    x = rng.standard_normal((n, 8))
    y = x @ np.linspace(1, -1, 8) + 0.1 * rng.standard_normal(n)
    table = np.column_stack([x, y])
    keep = [c for c in cols if c != drop]
    idx = [cols.index(c) for c in keep]
    lines = [" ".join(keep)] + [f"{i + 1} " + " ".join(f"{v:.6f}" for v in row[idx])
                                for i, row in enumerate(table)]
    p = tmp_path / "prostate.data"
    p.write_text("\n".join(lines) + "\n")
    return str(p)


def test_prostate_synthetic(tmp_path, rng):
    path = _prostate_file(tmp_path, rng)
    argv = ["prostate", "--input", path, "--splits", "1", "--train-size", "20",
            "--methods", "OLS,ad-lasso", "--grid-points", "5"]
    assert main(argv + ["--output", str(tmp_path / "a")]) == 0
    assert main(argv + ["--output", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()
    counts = (tmp_path / "a" / "selection_counts.csv").read_text().splitlines()
    assert counts[0].split(",")[1:] == ["lcavol", "lweight", "age", "lbph", "svi", "lcp",
                                        "gleason", "pgg45"]


def test_prostate_missing_column(tmp_path, rng, capsys):
    path = _prostate_file(tmp_path, rng, drop="lpsa")
    out = tmp_path / "o"
    assert main(["prostate", "--input", path, "--splits", "1", "--output", str(out)]) == 1
    assert "lpsa" in capsys.readouterr().err
    assert not out.exists()


def test_check_subset(tmp_path):
    out = tmp_path / "c"
    assert main(["check", "--suites", "variational", "--output", str(out)]) == 0
    doc = json.loads((out / "check.json").read_text())
    assert [s["name"] for s in doc["result"]["suites"]] == ["variational"]


def test_check_fault_injection(tmp_path, capsys):
    out = tmp_path / "c"
    code = main(["check", "--suites", "variational,tau", "--inject-fault", "tau",
                 "--output", str(out)])
    assert code == 3
    assert "tau" in capsys.readouterr().err
    doc = json.loads((out / "check.json").read_text())
    status = {s["name"]: s["passed"] for s in doc["result"]["suites"]}
    assert status == {"variational": True, "tau": False}


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "berhu", "--version"], capture_output=True, text=True)
    assert out.returncode == 0
    assert __version__ in out.stdout
