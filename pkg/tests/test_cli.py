import csv
import io
import json
import os
import subprocess
import sys

import pytest

from decoyfk import cli
from decoyfk.channel_model import ChannelParams, expected_tallies
from decoyfk.decoy_estimator import PulseEnsemble
from decoyfk.errors import NumericalFailure

ENSEMBLE_SET = ["--set", "mu=0.37", "--set", "nu=0.126", "--set", "q_signal=0.65", "--set", "q_weak=0.25"]


def invoke(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def table(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(body))


def preamble(text):
    return dict(line[2:].split(" = ", 1) for line in text.splitlines() if line.startswith("# "))


def test_bounds_zero_observation():
    code, out, _ = invoke("--mode", "bounds", "--set", "chi=0")
    assert code == 0
    rows = {r["method"]: r for r in table(out)}
    assert float(rows["exact"]["lower"]) == 0.0
    assert round(float(rows["exact"]["upper"]), 4) == 23.7190
    meta = preamble(out)
    assert meta["mode"] == "bounds" and len(meta["config_sha256"]) == 16


def test_table2_columns():
    code, out, _ = invoke("--mode", "table2")
    rows = table(out)
    assert code == 0 and len(rows) == 4
    assert {"n_sigma", "gaussian", "exact", "ch_operational", "ch_corollary"} <= set(rows[0])


def test_keyrate_with_fixed_ensemble():
    code, out, _ = invoke("--mode", "keyrate", *ENSEMBLE_SET)
    assert code == 0
    (row,) = table(out)
    assert float(row["rate"]) == pytest.approx(3.2834e-6, rel=1e-4)
    assert float(row["epsilon_spent"]) == pytest.approx(8e-10)


def test_estimate_from_tally_file(tmp_path):
    ens = PulseEnsemble(0.37, 0.126, 0.65, 0.25, 1e10)
    t = expected_tallies(ens, ChannelParams(distance=100))
    path = tmp_path / "tallies.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["basis", "state", "detections", "errors"])
        for (b, s), v in sorted(t.counts.items()):
            w.writerow([b, s, round(v.detections), round(v.errors)])
    code, out, err = invoke("--mode", "estimate", "--set", f"tallies={path}", *ENSEMBLE_SET)
    assert code == 0, err
    rows = {r["key_basis"]: r for r in table(out)}
    assert set(rows) == {"Z", "X"}
    assert 0.0 < float(rows["Z"]["phase_error_upper"]) < 0.5


def test_tally_file_with_fractional_counts_is_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("basis,state,detections,errors\nZ,signal,1.5,0\n")
    code, _, err = invoke("--mode", "estimate", "--set", f"tallies={path}", *ENSEMBLE_SET)
    assert code == 3
    assert json.loads(err)["field"] == "tallies"


def test_json_output():
    code, out, _ = invoke("--mode", "bounds", "--format", "json", "--set", "chi=0, 5")
    doc = json.loads(out)
    assert code == 0
    assert doc["metadata"]["table"] == "bounds"
    assert doc["columns"][:2] == ["chi", "method"]
    assert len(doc["rows"]) == 2 * 3


@pytest.mark.parametrize("argv", [("--bogus",), ("--mode", "dance"), ("--set", "novalue")])
def test_usage_errors_exit_1(argv):
    code, out, err = invoke(*argv)
    assert code == 1 and out == ""
    assert json.loads(err)["error"] == "usage"


@pytest.mark.parametrize("argv,field", [
    (("--set", "eta_d=2"), "eta_d"), (("--set", "tallies=/no/such/file.csv"), "tallies"),
    (("--mode", "estimate"), "mu")])
def test_validation_errors_exit_3(argv, field):
    code, _, err = invoke(*argv)
    rec = json.loads(err)
    assert code == 3 and rec["exit_code"] == 3 and rec["field"] == field


def test_unknown_config_key_reports_line(tmp_path):
    p = tmp_path / "c.conf"
    p.write_text("mode = bounds\nwhat = 1\n")
    code, _, err = invoke("--config", str(p))
    assert code == 3 and json.loads(err)["line"] == 2


def test_numeric_failure_exits_2(monkeypatch, tmp_path):
    def boom(cfg):
        raise NumericalFailure("root finder did not converge")

    monkeypatch.setitem(cli.MODE_FUNCS, "table2", boom)
    out = tmp_path / "t.csv"
    code, _, err = invoke("--mode", "table2", "--out", str(out))
    assert code == 2 and json.loads(err)["error"] == "NumericalFailure"
    assert not out.exists()


def test_failed_write_leaves_nothing_behind(monkeypatch, tmp_path):
    calls = []
    real = cli.render

    def flaky(t, cfg, fmt):
        calls.append(t.name)
        if len(calls) == 2:
            raise OSError("disk full")
        return real(t, cfg, fmt)

    monkeypatch.setattr(cli, "render", flaky)
    target = tmp_path / "figs"
    code, _, _ = invoke("--mode", "figures", "--set", "figures=2, 3", "--out", str(target))
    assert code == 3
    assert not target.exists()


def test_figures_directory(tmp_path):
    target = tmp_path / "figs"
    code, _, err = invoke("--mode", "figures", "--set", "figures=1, 2, 3", "--out", str(target))
    assert code == 0, err
    assert sorted(os.listdir(target)) == ["fig1.csv", "fig2.csv", "fig3.csv"]
    fig2 = table((target / "fig2.csv").read_text())
    assert float(fig2[0]["exact_upper"]) == pytest.approx(23.7190, abs=1e-4)


def test_sampling_output_is_byte_identical(tmp_path):
    args = ["--mode", "coverage", "--seed", "42", "--set", "trials=2000", "--set", "soundness_trials=64",
            "--set", "coverage_means=5, 50", "--set", "n=1e9", "--set", "distance=50"]
    a, b, c = (tmp_path / n for n in ("a", "b", "c"))
    assert invoke(*args, "--workers", "1", "--out", str(a))[0] == 0
    assert invoke(*args, "--workers", "2", "--out", str(b))[0] == 0
    assert invoke(*args[:3], "43", *args[4:], "--workers", "1", "--out", str(c))[0] == 0
    for name in os.listdir(a):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "coverage.csv").read_bytes() != (c / "coverage.csv").read_bytes()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "decoyfk", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
