import subprocess
import sys
from pathlib import Path
from types import SimpleNamespace

import pytest

from heavytail import __version__
from heavytail.cli import RunConfig, main, parse_count, read_config_file, resolve_config
from heavytail.errors import ConfigurationError
from heavytail.montecarlo import read_document


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("HEAVYTAIL_SEED", raising=False)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_stp_three_lotteries(capsys):
    code, out, _ = run(capsys, "stp", "--weights", "1/3,1/3,1/3", "--x", "8", "--strict")
    assert code == 0 and out.strip() == "195/256 = 0.76171875"


@pytest.mark.parametrize("weights,x,expected", [("1/2,1/2", "8", "3/4"), ("1", "2", "0")])
def test_stp_other_values(capsys, weights, x, expected):
    code, out, _ = run(capsys, "stp", "--weights", weights, "--x", x, "--strict")
    assert code == 0 and out.split(" = ")[0] == expected


def test_stp_budget_exit(capsys):
    code, _, err = run(capsys, "stp", "--weights", "1/3,1/3,1/3", "--x", "4096", "--strict", "--budget", "50")
    assert code == 3 and "lies in" in err


def test_stp_bad_rational(capsys):
    code, _, err = run(capsys, "stp", "--weights", "a/b", "--x", "8")
    assert code == 1 and "rational" in err


def test_compare_infinite_mean_is_consistent(capsys):
    code, out, _ = run(capsys, "compare", "--alpha", "0.5", "--eta", "1,0", "--theta", "0.5,0.5",
                       "--samples", "2e5")
    assert code == 0 and out.startswith("FSD-consistent")
    doc = read_document("heavytail-out/compare.txt")
    assert doc["anchor"] == "compare" and doc["tool_version"] == __version__
    assert doc["config.samples"] == "200000" and doc["seed"] == "0"


def test_compare_finite_mean_reports_crossing(capsys):
    code, out, _ = run(capsys, "compare", "--alpha", "2", "--eta", "1,0", "--theta", "0.5,0.5")
    assert code == 2 and "crossing" in out


def test_compare_order_violation(capsys):
    code, _, err = run(capsys, "compare", "--eta", "0.5,0.5", "--theta", "1,0", "--samples", "1e4")
    assert code == 1 and "k=1" in err


def test_compare_with_transform_and_dependence(capsys):
    code, out, _ = run(capsys, "compare", "--alpha", "0.5", "--eta", "0.6,0.3,0.1", "--theta", "0.4,0.35,0.25",
                       "--dependence", "common-shock", "--transform", "trigger:0.1", "--coupling",
                       "same-event", "--samples", "1e5", "--format", "json-lines")
    assert code == 0
    assert Path("heavytail-out/compare_curves.jsonl").exists()


def test_compare_usage_errors(capsys):
    assert run(capsys, "compare", "--eta", "1,0")[0] == 1
    assert run(capsys, "compare", "--eta", "1,0", "--theta", "0.5,0.5", "--samples", "10")[0] == 1
    assert run(capsys, "compare", "--eta", "1,0", "--theta", "0.5,0.5", "--confidence", "0.3")[0] == 1
    assert run(capsys, "compare", "--eta", "1,0", "--theta", "0.5,0.5,0", "--samples", "1e4")[0] == 1
    assert run(capsys, "nonsense")[0] == 1


def test_catalog_entry_and_unknown(capsys):
    code, out, _ = run(capsys, "catalog", "T1-sorted", "--samples", "5e4")
    assert code == 0 and "PASS" in out and "T1-sorted" in out
    code, _, err = run(capsys, "catalog", "NOPE")
    assert code == 1 and "T1-iid" in err


def test_figure_commands(capsys):
    code, _, err = run(capsys, "figure", "fig2", "--samples", "1e3", "--bootstrap", "0")
    assert code == 0 and "noise" in err
    lines = open("heavytail-out/fig2.csv").read().splitlines()
    assert lines[0] == "p,n,quantile" and len(lines) == 1 + 5 * 61
    code, out, _ = run(capsys, "figure", "fig1", "--samples", "1e5")
    assert code == 0 and len(out.splitlines()) == 2
    assert open("heavytail-out/fig1_0.csv").readline().strip() == "x,cdf_low,cdf_high"


def test_optimize_p1_uniform(capsys):
    code, out, _ = run(capsys, "optimize", "p1", "--alpha", "0.5", "--pref", "quantile:0.95", "--n", "3",
                       "--resolution", "10", "--samples", "2e5")
    assert code == 0
    best = out.splitlines()[-1]
    assert best.startswith("best:") and sorted(best.split("(")[1].split(")")[0].split(", ")) == ["0.3", "0.3", "0.4"]


def test_optimize_refuses_unbounded_utility(capsys):
    code, _, err = run(capsys, "optimize", "p1", "--alpha", "0.5", "--pref", "eu:exp")
    assert code == 1 and "unbounded" in err


def test_optimize_p2_with_penalty(capsys):
    code, out, _ = run(capsys, "optimize", "p2", "--penalty", "sumsq:0.1", "--samples", "1e5",
                       "--resolution", "6", "--n", "2")
    assert code == 0 and "nearest the uniform ray" in out


def test_parse_count():
    assert parse_count("1e6") == 10**6 and parse_count("10**3") == 1000 and parse_count("1_000") == 1000
    with pytest.raises(ConfigurationError):
        parse_count("1.5")


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nseed = 11\nsamples=1e4\nformat=json-lines\n")
    args = SimpleNamespace(config=str(cfg), seed=None, samples="2e4")
    resolved = resolve_config(args, environ={"HEAVYTAIL_SEED": "5"})
    assert resolved == RunConfig(seed=11, samples=20_000, format="json-lines")
    args = SimpleNamespace(config=None, seed=None, samples=None)
    assert resolve_config(args, environ={"HEAVYTAIL_SEED": "5"}).seed == 5
    args = SimpleNamespace(config=None, seed="7", samples=None)
    assert resolve_config(args, environ={"HEAVYTAIL_SEED": "5"}).seed == 7
    cfg.write_text("colour=blue\n")
    with pytest.raises(ConfigurationError):
        read_config_file(cfg)


def test_env_seed_reaches_documents(capsys, monkeypatch):
    monkeypatch.setenv("HEAVYTAIL_SEED", "9")
    run(capsys, "compare", "--eta", "1,0", "--theta", "0.5,0.5", "--samples", "1e4")
    assert read_document("heavytail-out/compare.txt")["seed"] == "9"


def test_outputs_identical_across_runs_and_workers(capsys, tmp_path):
    base = ["compare", "--alpha", "0.7", "--eta", "0.7,0.3", "--theta", "0.5,0.5", "--samples", "3e5"]
    run(capsys, *base, "--workers", "1", "--output-dir", "a")
    run(capsys, *base, "--workers", "3", "--output-dir", "b")
    run(capsys, *base, "--workers", "1", "--output-dir", "c")
    for name in ("compare_curves.csv",):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "c" / name).read_bytes()
    strip = lambda p: [l for l in p.read_text().splitlines() if not l.startswith(("command=", "config."))]
    assert strip(tmp_path / "a" / "compare.txt") == strip(tmp_path / "b" / "compare.txt")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "heavytail", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
