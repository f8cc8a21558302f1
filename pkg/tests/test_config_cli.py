import csv
import json
import math
import subprocess
import sys

import pytest

from neuroage import config as cfg
from neuroage.cli import main
from neuroage.output import RESULTS_HEADER
from neuroage.scheduler import ConfigError


def test_three_layer_precedence(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# tuned\npolicy.tdsi_ms = 20\nrun.temperature_K = 325\n")
    values = cfg.resolve(path, [("policy.tdsi_ms", "30")])
    assert values["policy.tdsi_ms"] == 30.0  # override beats file
    assert values["run.temperature_K"] == 325.0  # file beats default
    assert values["policy.tdsc_ms"] == 1.0  # default


def test_unknown_key_lists_valid_keys():
    with pytest.raises(ConfigError) as err:
        cfg.resolve(overrides=[("policy.tdsx_ms", "1")])
    assert "policy.tdsi_ms" in str(err.value)


def test_bad_value_and_bad_line(tmp_path):
    with pytest.raises(ConfigError):
        cfg.resolve(overrides=[("policy.tdsi_ms", "ten")])
    path = tmp_path / "c.cfg"
    path.write_text("policy.tdsi_ms 10\n")
    with pytest.raises(ConfigError):
        cfg.resolve(path)


def test_seed_must_be_u64():
    assert cfg.resolve(overrides=[("workload.seed", str(2**64 - 1))])["workload.seed"] == 2**64 - 1
    with pytest.raises(ConfigError):
        cfg.resolve(overrides=[("workload.seed", str(2**64))])


def test_device_keys_reach_params():
    values = cfg.resolve(overrides={"device.nbti_Ea": "0.07"})
    assert cfg.run_config(values).params.nbti_Ea == 0.07


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_gen_trace_is_byte_identical(tmp_path, capsys):
    args = ["gen-trace", "--set", "workload.class=bursty", "--set", "workload.neurons=5", "--seed", "9"]
    assert run_cli(args + ["--out", str(tmp_path / "a")], capsys)[0] == 0
    assert run_cli(args + ["--out", str(tmp_path / "b")], capsys)[0] == 0
    a = (tmp_path / "a" / "trace.csv").read_bytes()
    assert a == (tmp_path / "b" / "trace.csv").read_bytes()
    assert len(a) > 0


def test_bare_dotted_flags_are_overrides(tmp_path, capsys):
    code, out, _ = run_cli(["validate-config", "--policy.tdsi_ms", "40", "--run.id=x"], capsys)
    assert code == 0
    assert "policy.tdsi_ms = 40.0" in out and "run.id = x" in out


@pytest.mark.parametrize(
    "args",
    [
        ["simulate", "--set", "policy.mode=threshold"],
        ["simulate", "--set", "workload.rate=0"],
        ["simulate", "--set", "policy.tdsc_ms=20"],
        ["validate-config", "--set", "no.such=1"],
        ["validate-config", "--bogus"],
    ],
)
def test_config_errors_exit_2(args, tmp_path, capsys):
    code, _, err = run_cli(args + ["--out", str(tmp_path)], capsys)
    assert code == 2
    assert json.loads(err.strip().splitlines()[-1])["exit_code"] == 2


def test_malformed_trace_exits_3(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("0,1.0\nx,2\n")
    code, _, err = run_cli(["simulate", "--set", f"workload.trace={bad}", "--out", str(tmp_path)], capsys)
    assert code == 3
    assert "line 2" in json.loads(err)["message"]


def test_results_schema_mismatch_refused(tmp_path, capsys):
    (tmp_path / "results.csv").write_text("run_id,something_else\n")
    code, _, _ = run_cli(["simulate", "--set", "workload.neurons=2", "--out", str(tmp_path)], capsys)
    assert code == 3
    assert (tmp_path / "results.csv").read_text() == "run_id,something_else\n"


def test_simulate_appends_rows_and_events(tmp_path, capsys):
    args = ["simulate", "--set", "workload.neurons=3", "--set", "workload.class=dense", "--out", str(tmp_path)]
    assert run_cli(args, capsys)[0] == 0
    assert run_cli(args, capsys)[0] == 0
    rows = list(csv.reader((tmp_path / "results.csv").open()))
    assert rows[0] == RESULTS_HEADER and len(rows) == 3
    kinds = {json.loads(line)["type"] for line in (tmp_path / "events.jsonl").open()}
    assert kinds == {"run", "destress", "delayed_spike"}


@pytest.fixture(scope="module")
def default_sweep(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    assert main(["sweep", "--out", str(out)]) == 0
    return out


def test_default_sweep_has_fifteen_rows(default_sweep):
    rows = list(csv.DictReader((default_sweep / "results.csv").open()))
    assert len(rows) == 15
    assert {(float(r["tdsi_ms"]), float(r["temp_K"])) for r in rows} == {
        (t, k) for t in (10.0, 20.0, 30.0, 40.0, 50.0) for k in (300.0, 325.0, 350.0)
    }
    for r in rows:
        assert float(r["overhead"]) == pytest.approx(float(r["tdsc_ms"]) / float(r["tdsi_ms"]))


def test_sweep_figures(default_sweep):
    for name in ("fig_aging_vs_tdsi.csv", "fig_metrics_vs_tdsi.csv", "fig_aging_vs_temp.csv"):
        rows = list(csv.DictReader((default_sweep / name).open()))
        assert rows and all(math.isfinite(float(r["y"])) for r in rows)
    temp_rows = list(csv.DictReader((default_sweep / "fig_aging_vs_temp.csv").open()))
    assert all(float(r["y"]) == 1.0 for r in temp_rows if float(r["x"]) == 300.0)


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "neuroage", "validate-config", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "sweep.tdsi_ms = 10.0,20.0,30.0,40.0,50.0" in proc.stdout
