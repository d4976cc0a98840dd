import json

import pytest

from rieszchaos import acceptance
from rieszchaos.acceptance import CriterionResult
from rieszchaos.cli import EXIT_BUDGET, EXIT_FAIL, EXIT_INVALID, EXIT_OK, OUT_ENV, RunConfig, main


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir()) if p.name != "manifest.json"}


def _manifest(d):
    m = json.loads((d / "manifest.json").read_text())
    m.pop("timing")
    m["config"].pop("out")
    m["config"].pop("threads")
    return m


# [TRIVIAL] determinism contract
def test_synth_example_is_byte_identical(tmp_path):
    args = ["synth", "--H", "0.7", "--d", "2", "--n", "1024", "--paths", "4", "--seed", "42"]
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert main(args + ["--out", str(c), "--threads", "4"]) == EXIT_OK
    fa = _files(a)
    assert sorted(fa) == [f"path_{i:05d}.csv" for i in range(4)]
    assert fa == _files(b) == _files(c)
    assert _manifest(a) == _manifest(b) == _manifest(c)
    text = fa["path_00000.csv"].decode()
    assert "\r" not in text
    lines = text.split("\n")
    assert lines[0] == "t,low,high,total" and len(lines) == 1026 and lines[-1] == ""
    assert lines[1] == "0,0,0,0"
    m = json.loads((a / "manifest.json").read_text())
    assert {"config", "versions", "error_budgets", "timing", "seed_scheme"} <= set(m)
    assert m["error_budgets"]["tails"]["total"] <= 1e-4


def test_json_format_and_env_out(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert main(["synth", "--H", "0.75", "--n", "33", "--paths", "2", "--format", "json"]) == EXIT_OK
    obj = json.loads((tmp_path / "env" / "path_00001.json").read_text())
    assert set(obj) == {"t", "low", "high", "total"} and len(obj["t"]) == 33


def test_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"H": 0.7, "d": 1, "n": 17, "n_paths": 1, "seed": 3}))
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_OK
    assert (tmp_path / "o" / "path_00000.csv").exists()
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["synth", "--config", str(cfg)]) == EXIT_INVALID


def test_validation_lists_every_violation(tmp_path, capsys):
    code = main(["synth", "--H", "0.5", "--paths", "0", "--seed", "-1", "--out", str(tmp_path)])
    assert code == EXIT_INVALID
    err = json.loads(capsys.readouterr().err)
    assert len(err["violations"]) == 3
    assert main(["field", "--H", "0.7", "--d", "3", "--out", str(tmp_path)]) == EXIT_INVALID
    assert main(["dimension", "--Hvec", "0.8,0.6", "--out", str(tmp_path)]) == EXIT_INVALID
    with pytest.raises(Exception):
        RunConfig("nope").validate()


def test_budget_failure_exit_code(tmp_path, capsys):
    code = main(["synth", "--H", "0.7", "--d", "2", "--n", "17", "--jmin", "-2", "--jmax", "3",
                 "--out", str(tmp_path)])
    assert code == EXIT_BUDGET
    assert "budget" in capsys.readouterr().err


def test_field_and_analyze(tmp_path):
    assert main(["field", "--H", "0.7", "--d", "2", "--n", "9", "--jmax", "5", "--budget", "1",
                 "--out", str(tmp_path / "f")]) == EXIT_OK
    lines = (tmp_path / "f" / "field_00000.csv").read_text().splitlines()
    assert lines[0] == "t1,t2,value" and len(lines) == 82
    assert main(["analyze", "--H", "0.7", "--d", "1", "--n", "1025", "--out", str(tmp_path / "a")]) == EXIT_OK
    rep = json.loads((tmp_path / "a" / "regularity_00000.json").read_text())
    assert 0 < rep["global_exponent"] <= 1
    assert set(rep["fit_diagnostics"]["modulus_b_sensitivity"]) == {"2.0", "4.0", "8.0"}
    assert (tmp_path / "a" / "summary.csv").read_text().startswith("path,H,d,global_exponent")


# [DERIVED] bounds from the analysis module, estimates from box counting
def test_dimension_command(tmp_path):
    assert main(["dimension", "--Hvec", "0.6,0.8", "--d", "1", "--paths", "2", "--out", str(tmp_path)]) == EXIT_OK
    rep = json.loads((tmp_path / "dimension.json").read_text())
    assert rep["upper_range"] == pytest.approx(1.5) and rep["lower_range"] == pytest.approx(1.5)
    assert 1.2 < rep["est_range"] < 1.8 and 1.2 < rep["est_graph"] < 1.8
    assert len(rep["fit_windows"]["range_estimates"]) == 2


# [TRIVIAL] orchestration of the acceptance suite
def test_verify_all_orchestration(tmp_path, monkeypatch, capsys):
    fake = [CriterionResult(1, "one", True, "ok", {}, 0.1), CriterionResult(2, "two", False, "bad", {}, 0.1)]

    def run_all(quick=False, threads=1, echo=False):
        for r in fake:
            print(r.line())
        return fake
    monkeypatch.setattr(acceptance, "run_all", run_all)
    assert main(["verify-all", "--quick", "--out", str(tmp_path)]) == EXIT_FAIL
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" in out
    assert len(json.loads((tmp_path / "acceptance.json").read_text())) == 2
