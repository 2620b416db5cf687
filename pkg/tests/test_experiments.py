import json
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from detachment.cli import main
from detachment.experiments import (
    REF_DERIVED,
    REF_PUBLISHED,
    REF_TRIVIAL,
    REGISTRY,
    ExperimentSpec,
    SchemaError,
    format_value,
    run_experiment,
    validate,
)

SMALL_IE = {"ns": [20, 40], "tol_n": 40, "x_step": 0.5}


def test_registry_names():
    assert set(REGISTRY) == {
        "ie_limit", "critical_window", "fidi_convergence", "concentration_phase", "poisson_approx",
        "almost_detachment", "zero_percent", "first_detachment_hist", "beta_limits", "clumping_drop",
        "large_deviations", "tau_tail",
    }
    for exp in REGISTRY.values():
        assert "seed" in exp.defaults
        assert exp.run.__doc__


def test_schema_errors():
    with pytest.raises(SchemaError):
        validate(ExperimentSpec("nope"))
    with pytest.raises(SchemaError):
        validate(ExperimentSpec("ie_limit", {"bogus": 1}))
    with pytest.raises(SchemaError):
        validate(ExperimentSpec("ie_limit", {"ns": 5}))
    with pytest.raises(SchemaError):
        validate(ExperimentSpec("ie_limit", {"tol": "small"}))
    with pytest.raises(SchemaError):
        validate(ExperimentSpec("beta_limits", {"n": True}))


def test_schema_coerces_numbers():
    p = validate(ExperimentSpec("ie_limit", {"tol": 1, "tol_n": 40.0}))
    assert p["tol"] == 1.0 and isinstance(p["tol"], float)
    assert p["tol_n"] == 40 and isinstance(p["tol_n"], int)
    with pytest.raises(SchemaError):
        validate(ExperimentSpec("ie_limit", {"tol_n": 40.5}))


def test_format_value():
    assert format_value(Fraction(2, 9)) == "2/9"
    assert format_value(0.1) == "0.10000000000000001"
    assert float(format_value(1 / 3)) == 1 / 3
    assert format_value(np.float64(2.5)) == "2.5"
    assert format_value(np.int64(7)) == "7"
    assert format_value(True) == "true"


def test_report_is_reproducible(tmp_path):
    a = run_experiment(ExperimentSpec("ie_limit", SMALL_IE, str(tmp_path / "a")))
    b = run_experiment(ExperimentSpec("ie_limit", SMALL_IE, str(tmp_path / "b")))
    assert (tmp_path / "a" / "ie_limit.csv").read_bytes() == (tmp_path / "b" / "ie_limit.csv").read_bytes()
    meta = json.loads((tmp_path / "a" / "ie_limit.json").read_text())
    assert meta["spec"]["parameters"]["ns"] == [20, 40]
    assert meta["passed"] == a.passed
    assert a.csv_text().splitlines()[0] == "n,grid_points,sup_error"


def test_simulation_report_is_reproducible():
    params = {"n": 3, "k": 50, "replicas": 2000, "seed": 5}
    a = run_experiment(ExperimentSpec("beta_limits", params))
    b = run_experiment(ExperimentSpec("beta_limits", params))
    assert a.csv_text() == b.csv_text()
    c = run_experiment(ExperimentSpec("beta_limits", {**params, "seed": 6}))
    assert a.csv_text() != c.csv_text()


def test_reference_kinds():
    kinds = {REF_PUBLISHED, REF_TRIVIAL, REF_DERIVED}
    for name, params in [("ie_limit", SMALL_IE), ("large_deviations", {}), ("critical_window", {"ns": [100, 200]})]:
        rep = run_experiment(ExperimentSpec(name, params))
        for ref in rep.to_json()["references"]:
            assert ref["kind"] in kinds
            assert set(ref) == {"name", "value", "kind", "note"}


def test_cli_exit_codes(tmp_path, capsys):
    small = ["--set", "ns=[20,40]", "--set", "tol_n=40", "--set", "x_step=0.5"]
    assert main(["experiment", "ie_limit", *small, "--set", "tol=1e-9", "--check"]) == 2
    assert main(["experiment", "ie_limit", *small, "--set", "tol=1e-9"]) == 0
    assert main(["experiment", "ie_limit", "--set", "bogus=1"]) == 1
    assert main(["experiment", "ie_limit", "--set", "novalue"]) == 1
    assert main(["exact", "pi", "--n", "3"]) == 1
    assert main(["exact", "pi", "--n", "3", "--k", "2"]) == 0
    assert main(["no-such-command"]) == 1
    capsys.readouterr()
    assert main(["exact", "pi", "--n", "3", "--k", "3", "--exact"]) == 0
    assert capsys.readouterr().out.strip() == "2/9"
    assert main(["exact", "tau-cdf", "--n", "2", "--k", "3", "--exact"]) == 0
    assert capsys.readouterr().out.strip() == "1/2"
    assert main(["exact", "pi", "--n", "0", "--k", "3"]) == 1


def test_cli_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    out = tmp_path / "out"
    cfg.write_text(json.dumps({"name": "ie_limit", "parameters": SMALL_IE, "output_path": str(out)}))
    assert main(["experiment", "ie_limit", "--config", str(cfg), "--check"]) == 0
    assert (out / "ie_limit.csv").exists()
    # --set overrides the file
    assert main(["experiment", "ie_limit", "--config", str(cfg), "--set", "tol=1e-9", "--check"]) == 2
    assert main(["experiment", "tau_tail", "--config", str(cfg)]) == 1


def test_cli_oracle_and_list(capsys):
    assert main(["oracle", "single", "--n", "2", "--k", "2"]) == 0
    out = capsys.readouterr().out
    assert "L=2 N=2 clump=2 1/2" in out
    assert main(["oracle", "tau-truncated", "--n", "2", "--k", "3", "--K", "3000"]) == 0
    assert main(["list"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) >= len(REGISTRY)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "detachment", "exact", "pi", "--n", "2", "--k", "2", "--exact"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "1/2"
