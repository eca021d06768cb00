import json
import math

import pytest

import main
from settings import get_settings

PRESETS = [
    "continuous_suite",
    "finite_suite",
    "gaussian_series",
    "langevin",
    "so_conjugation",
    "sphere_linear",
    "sphere_quadratic",
    "trace_suite",
]


def _write(tmp_path, payload, name="config.json"):
    path = tmp_path / name
    path.write_text(payload if isinstance(payload, str) else json.dumps(payload))
    return str(path)


def _json_lines(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


# ══════════════════════════════════════════════════════════════════════════════
# bounds
# ══════════════════════════════════════════════════════════════════════════════

def test_bounds_tail_at_zero(capsys):
    assert main.main(["bounds", "--d", "1", "--c", "1", "--v", "1", "--t", "0"]) == 0
    out = capsys.readouterr().out
    assert "t=0  tail=1" in out
    assert out.startswith("Bounds for d=1")


def test_bounds_product_preset(capsys):
    assert main.main(["--format", "json", "bounds", "--preset", "product", "--q", "1", "2", "3"]) == 0
    rows = _json_lines(capsys.readouterr().out)
    coefficients = [r["coefficient"] for r in rows if r["kind"] == "poly-moment"]
    assert coefficients == pytest.approx([math.sqrt(2.0), math.sqrt(6.0), math.sqrt(10.0)])
    assert all(r["v"] == 1 for r in rows)


def test_bounds_csv(capsys):
    assert main.main(["--format", "csv", "bounds", "--c", "2", "--d", "4", "--t-grid", "1,2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "kind,q,t,coefficient,bound,v"
    assert sum(line.startswith("tail,") for line in lines) == 2


@pytest.mark.parametrize("argv", [["bounds"], ["bounds", "--preset", "sphere"], ["bounds", "--preset", "so", "--n", "1"]])
def test_bounds_needs_a_constant(argv):
    assert main.main(argv) == 2


def test_bounds_rejects_inadmissible_q():
    assert main.main(["bounds", "--c", "1", "--q", "1.2"]) == 2


# ══════════════════════════════════════════════════════════════════════════════
# verify
# ══════════════════════════════════════════════════════════════════════════════

def test_empty_check_list(tmp_path, capsys):
    assert main.main(["verify", _write(tmp_path, {"seed": 1, "checks": []})]) == 0
    assert capsys.readouterr().out == ""


def test_verify_writes_one_line_per_report(tmp_path, capsys):
    config = {
        "seed": 11,
        "checks": [
            {"name": "poincare", "params": {"trials": 3}},
            {"name": "bakry-emery-small-c", "params": {"trials": 20}},
        ],
    }
    assert main.main(["verify", _write(tmp_path, config)]) == 0
    reports = _json_lines(capsys.readouterr().out)
    assert [r["name"] for r in reports] == ["poincare", "bakry-emery-small-c"]
    assert reports[0]["status"] != "fail"
    assert reports[1]["negative_control"] is True
    assert reports[0]["v"] == 1
    assert reports[0]["elapsed_s"] == 0.0


def test_gating_a_negative_control_fails_the_run(tmp_path):
    config = {"seed": 11, "checks": [{"name": "bakry-emery-small-c", "gating": True, "params": {"trials": 20}}]}
    assert main.main(["verify", _write(tmp_path, config)]) == 1


def test_seed_override(tmp_path, capsys):
    config = {"seed": 11, "checks": [{"name": "poincare", "params": {"trials": 2}}]}
    assert main.main(["--seed", "5", "verify", _write(tmp_path, config)]) == 0
    assert _json_lines(capsys.readouterr().out)[0]["seed"] == 5


def test_verify_csv_to_file(tmp_path):
    config = {"seed": 3, "checks": [{"name": "jensen", "params": {"trials": 2}}]}
    out = tmp_path / "reports.csv"
    assert main.main(["--format", "csv", "--out", str(out), "verify", _write(tmp_path, config)]) == 0
    header, row = out.read_text().splitlines()
    assert header == "name,status,margin,tolerance,trials,seed,elapsed_s,negative_control,v"
    cells = row.split(",")
    assert cells[0] == "jensen"
    assert cells[1] in ("pass", "pass-marginal")
    assert row.endswith(",false,1")


def test_parallel_jobs_match_serial(tmp_path, capsys):
    config = _write(tmp_path, {"seed": 8, "checks": [{"name": "poincare", "params": {"trials": 2}}, {"name": "jensen", "params": {"trials": 2}}]})

    def summary(text):
        return [(r["name"], r["status"], r["margin"], r["trials"]) for r in _json_lines(text)]

    assert main.main(["verify", config]) == 0
    serial = summary(capsys.readouterr().out)
    assert main.main(["--jobs", "2", "verify", config]) == 0
    assert summary(capsys.readouterr().out) == serial


@pytest.mark.parametrize(
    "payload",
    [
        "{not json",
        "[1, 2]",
        {"checks": []},
        {"seed": -1, "checks": []},
        {"seed": 1, "checks": [{"name": "no-such-check"}]},
        {"seed": 1, "checks": [], "unexpected": True},
        {"seed": 1, "model": {"kind": "sphere-linear", "coefficients": [{"d": 1, "re": [[1.0]]}]}},
    ],
)
def test_malformed_configs_exit_with_config_error(payload, tmp_path):
    assert main.main(["verify", _write(tmp_path, payload)]) == 2


def test_missing_config():
    assert main.main(["verify", "does-not-exist.json"]) == 2


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    monkeypatch.setenv("MCLAB_JACOBI_MAX_SWEEPS", "1")
    get_settings.cache_clear()
    config = {"seed": 2, "checks": [{"name": "poincare", "params": {"trials": 1, "d": 8}}]}
    assert main.main(["verify", _write(tmp_path, config)]) == 3


def test_invalid_environment(monkeypatch):
    monkeypatch.setenv("MCLAB_EIG_METHOD", "qr")
    get_settings.cache_clear()
    assert main.main(["list"]) == 2


def test_unknown_command():
    assert main.main(["frobnicate"]) == 2


@pytest.mark.parametrize("name", PRESETS)
def test_bundled_presets_parse(name):
    config = main.load_config(name)
    assert config.seed >= 0


# ══════════════════════════════════════════════════════════════════════════════
# experiment and list
# ══════════════════════════════════════════════════════════════════════════════

def test_experiment_writes_a_tail_csv(tmp_path, capsys):
    config = {
        "seed": 4,
        "model": {"kind": "gaussian-series", "coefficients": [{"d": 1, "re": [[1.0]]}]},
        "experiment": {"samples": 4000, "t_grid": [1.0, 0.5]},
    }
    assert main.main(["experiment", _write(tmp_path, config)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "t,empirical,stderr,bound,pass,v"
    assert [line.split(",")[0] for line in lines[1:]] == ["0.5", "1.0"]
    assert all(line.endswith(",true,1") for line in lines[1:])


def test_experiment_needs_a_model(tmp_path):
    assert main.main(["experiment", _write(tmp_path, {"seed": 1})]) == 2


def test_list(capsys):
    assert main.main(["list"]) == 0
    out = capsys.readouterr().out
    assert "sphere-linear" in out
    assert "mean-value-trace" in out
    assert "[negative control]" in out
    count = int(out.split("Checks (")[1].split(")")[0])
    assert count >= 12
    assert "finite_suite" in out
