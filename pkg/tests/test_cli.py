import csv
import json
import math
import subprocess
import sys

import pytest

from deconv.cli import main, selftest_checks
from deconv.config import ConfigError, emit_plotdata, read_samples, validate_config
from deconv.fourier_grid import ContractError

from oracles import HSTAR_1E6

BASE = {
    "class": {"alpha": 1.0, "r": 1.0, "L": 1 / math.pi},
    "noise": {"kind": "gaussian", "sigma": 1.0},
    "n": 10**6,
}


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_bandwidth_command(tmp_path, capsys):
    code, out, _ = run(capsys, "bandwidth", "--config", write(tmp_path, BASE), "--quiet")
    assert code == 0
    data = json.loads(out)
    assert abs(data["h"] - 0.55115) < 1e-4
    assert data["h"] == pytest.approx(HSTAR_1E6, rel=1e-13)
    assert data["rates"]["l2"] == pytest.approx(8.450858417746001e-3, rel=1e-12)


def test_missing_field_names_path(tmp_path, capsys):
    cfg = json.loads(json.dumps(BASE))
    del cfg["class"]["alpha"]
    code, _, err = run(capsys, "bandwidth", "--config", write(tmp_path, cfg))
    assert code == 1
    assert "class.alpha" in err


def test_wrong_type_names_field(tmp_path, capsys):
    cfg = dict(BASE, n="many")
    code, _, err = run(capsys, "bandwidth", "--config", write(tmp_path, cfg))
    assert code == 1 and "n:" in err


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        validate_config(dict(BASE, colour="red"), "bandwidth")


def test_missing_required_section():
    with pytest.raises(ConfigError, match="target"):
        validate_config(BASE, "simulate")


def test_invalid_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    code, _, err = run(capsys, "rates", "--config", str(path))
    assert code == 1 and "not valid JSON" in err


def test_selftest(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0
    assert out.count("PASS") == len(selftest_checks())
    assert all(ok for _, ok in selftest_checks())


def test_rates_command(tmp_path, capsys):
    cfg = {k: v for k, v in BASE.items() if k != "n"}
    cfg["n_list"] = [10**4, 10**6]
    code, out, _ = run(capsys, "rates", "--config", write(tmp_path, cfg))
    rows = json.loads(out)["rows"]
    assert code == 0 and [r["n"] for r in rows] == [10**4, 10**6]
    assert rows[1]["pointwise"] == pytest.approx(1.3449958905540293e-3, rel=1e-12)


def test_bounds_command_and_slack(tmp_path, capsys):
    code, out, _ = run(capsys, "bounds", "--config", write(tmp_path, BASE), "--slack", "2.0")
    data = json.loads(out)
    assert code == 0
    assert data["total_with_slack"] == pytest.approx(2 * data["total_bound"])


def test_bias_domination_failure_exits_2(tmp_path, capsys):
    cfg = dict(BASE, **{"class": {"alpha": 1.0, "r": 1.0, "L": 1e-12}})
    code, _, err = run(capsys, "bounds", "--config", write(tmp_path, cfg))
    assert code == 2 and "numerical failure" in err


def test_estimate_command(tmp_path, capsys):
    samples = tmp_path / "y.csv"
    samples.write_text("y\n" + "\n".join(str(0.1 * k - 2) for k in range(40)) + "\n")
    cfg = {"noise": {"kind": "gaussian", "sigma": 1.0}, "h": 0.7, "grid": {"n_points": 256, "x_max": 32.0}}
    out_path = tmp_path / "fhat.csv"
    code, _, _ = run(capsys, "estimate", "--config", write(tmp_path, cfg), "--samples", str(samples), "--output", str(out_path))
    assert code == 0
    rows = list(csv.DictReader(out_path.open()))
    assert len(rows) == 256
    total = sum(float(r["f_hat"]) for r in rows) * 64 / 256
    assert total == pytest.approx(1.0, abs=1e-10)


def test_estimate_overflow_exits_2(tmp_path, capsys):
    samples = tmp_path / "y.csv"
    samples.write_text("0.5\n")
    cfg = {"noise": {"kind": "gaussian", "sigma": 1.0}, "h": 0.02}
    code, _, err = run(capsys, "estimate", "--config", write(tmp_path, cfg), "--samples", str(samples))
    assert code == 2 and "EstimatorOverflowError" in err


def test_read_samples_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0\nfoo\n")
    with pytest.raises(ConfigError, match="line 2"):
        read_samples(str(bad))
    with pytest.raises(ConfigError):
        read_samples(str(tmp_path / "missing.csv"))


SIM = {
    "class": {"alpha": 0.5, "r": 1.0, "L": 1 / math.pi},
    "noise": {"kind": "gaussian", "sigma": 1.0},
    "target": {"kind": "cauchy", "scale": 1.0},
    "n": 1000,
    "n_list": [1000, 3000],
    "replications": 6,
    "eval_points": [0.0],
    "master_seed": 4,
}


def test_simulate_is_deterministic_across_threads(tmp_path, capsys):
    cfg = write(tmp_path, SIM)
    outputs = []
    for threads in ("1", "4"):
        out = tmp_path / f"sim{threads}.json"
        sweep = tmp_path / f"sweep{threads}.csv"
        code, _, _ = run(capsys, "simulate", "--config", cfg, "--threads", threads, "--output", str(out), "--sweep", str(sweep))
        assert code == 0
        outputs.append((out.read_bytes(), sweep.read_bytes()))
    assert outputs[0] == outputs[1]


def test_seed_flag_overrides_config(tmp_path, capsys):
    cfg = write(tmp_path, SIM)
    _, a, _ = run(capsys, "simulate", "--config", cfg, "--seed", "4")
    _, b, _ = run(capsys, "simulate", "--config", cfg)
    _, c, _ = run(capsys, "simulate", "--config", cfg, "--seed", "5")
    assert a == b and a != c


def test_threads_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DECONV_THREADS", "zero")
    code, _, err = run(capsys, "simulate", "--config", write(tmp_path, SIM))
    assert code == 1 and "DECONV_THREADS" in err


def test_lowerbound_reports_failed_stage(tmp_path, capsys):
    cfg = dict(BASE, **{"class": {"alpha": 0.5, "r": 1.0, "L": 1 / math.pi}})
    code, out, _ = run(capsys, "lowerbound", "--config", write(tmp_path, cfg))
    data = json.loads(out)
    assert code == 0 and data["failed_stage"] == "build_pair"


def test_lowerbound_sweep(tmp_path, capsys):
    cfg = {
        "class": {"alpha": 0.5, "r": 1.0, "L": 1 / math.pi},
        "noise": {"kind": "gaussian", "sigma": 1.0},
        "n_list": [10**6, 10**8],
        "lower_bound": {"c0": 10.0},
    }
    sweep = tmp_path / "lb.csv"
    code, out, _ = run(capsys, "lowerbound", "--config", write(tmp_path, cfg), "--sweep", str(sweep))
    assert code == 0
    rows = list(csv.DictReader(sweep.open()))
    assert [int(r["n"]) for r in rows] == [10**6, 10**8]
    assert json.loads(out)["smallest_valid_n"] == 10**6


def test_unwritable_output_exits_2(tmp_path, capsys):
    code, _, err = run(capsys, "bandwidth", "--config", write(tmp_path, BASE), "--output", str(tmp_path / "no" / "x.json"))
    assert code == 2 and "cannot write" in err


def test_plotdata_round_trip(tmp_path):
    table = [{"n": 10**k, "risk": 1 / 3**k, "rate": math.pi / 7**k, "ratio": 0.1 + k * 1e-17} for k in range(1, 5)]
    path = tmp_path / "t.csv"
    emit_plotdata(table, str(path))
    raw = path.read_bytes()
    assert b"\r\n" not in raw and b"," in raw
    back = list(csv.DictReader(path.open()))
    for row, orig in zip(back, table):
        assert int(row["n"]) == orig["n"]
        for key in ("risk", "rate", "ratio"):
            assert float(row[key]) == orig[key]


def test_plotdata_is_locale_independent(tmp_path, monkeypatch):
    import locale

    try:
        locale.setlocale(locale.LC_NUMERIC, "de_DE.UTF-8")
    except locale.Error:
        pass
    try:
        path = tmp_path / "t.csv"
        emit_plotdata([{"x": 0.5}], str(path))
        assert path.read_bytes() == b"x\n0.5\n"
    finally:
        locale.setlocale(locale.LC_NUMERIC, "C")


def test_empty_table_is_an_error(tmp_path):
    with pytest.raises(ContractError):
        emit_plotdata([], str(tmp_path / "t.csv"))


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "deconv.cli", "selftest", "--quiet"], capture_output=True, text=True)
    assert proc.returncode == 0
