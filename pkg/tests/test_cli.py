import csv
import io
import json
import math
from pathlib import Path

import pytest

from ambitfield.cli import fmt, main

from schema_util import shape

DATA = Path(__file__).parent / "data"
TINY = str(DATA / "tiny.toml")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


@pytest.mark.parametrize(
    "value,text",
    [
        (0.1, "0.1"),
        (2.0, "2"),
        (1 / 3, repr(1 / 3)),
        (1.23456789012e-5, "1.23456789012e-05"),
        (7, "7"),
        (True, "true"),
        (None, "undefined"),
        (math.nan, "nan"),
        (-math.inf, "-inf"),
        ("label", "label"),
    ],
)
def test_fmt(value, text):
    assert fmt(value) == text


@pytest.mark.parametrize("x", [0.1, 1 / 3, math.pi * 1e-7, 123456789.123456789, -2.5e300])
def test_fmt_round_trips(x):
    assert float(fmt(x)) == x


def test_exponents(capsys):
    code, out, _ = run(capsys, "exponents", "--config", TINY, "--table", "mu")
    assert code == 0
    table = rows(out)
    assert table[0] == ["n", "mu", "condition_ok"]
    assert table[2] == ["2", "0.2", "true"]
    assert table[6] == ["6", "3", "false"]


def test_exponents_to_directory(capsys, tmp_path):
    code, out, _ = run(capsys, "exponents", "--config", TINY, "--out", str(tmp_path), "--max-order", "3")
    assert code == 0
    assert rows((tmp_path / "exponents_tau.csv").read_text())[0] == ["n1", "n2", "tau"]
    assert len(rows((tmp_path / "exponents_tau.csv").read_text())) == 1 + 6


def test_volume(capsys):
    code, out, _ = run(capsys, "volume", "--config", TINY, "--dt", "0.1,0.2")
    table = rows(out)
    assert table[0] == ["dx", "dt", "volume"]
    # tiny config: tau2 ln(T_scal / dt) + (T - T_scal) l_scal / 2
    assert float(table[1][2]) == pytest.approx(0.2 * math.log(10) + 0.02, abs=1e-9)
    assert float(table[2][2]) == pytest.approx(0.2 * math.log(5) + 0.02, abs=1e-9)


def test_volume_default_grid(capsys):
    code, out, _ = run(capsys, "volume", "--config", TINY, "--points", "4")
    assert len(rows(out)) == 1 + 8


def test_correlate(capsys):
    code, out, _ = run(capsys, "correlate", "--config", TINY, "--dx", "0.5", "--orders", "1,2")
    table = rows(out)
    assert table[0] == ["dx", "dt", "analytic"]
    assert float(table[1][2]) > 0


def test_correlate_domain_error(capsys, monkeypatch):
    for key, value in {"KIND": '"nig"', "ALPHA": "3.0", "BETA": "0.0", "DELTA": "1.0"}.items():
        monkeypatch.setenv(f"AMBITFIELD_BASIS__{key}", value)
    code, _, err = run(capsys, "correlate", "--config", TINY, "--dx", "0.5", "--orders", "2,2")
    assert code == 2 and "|beta + xi| <= alpha" in err


def test_appendix(capsys):
    code, out, _ = run(capsys, "appendix", "--config", TINY, "--samples", "2000")
    table = rows(out)
    assert table[0] == ["n", "l", "Fn", "stderr", "bound"]
    assert len(table) == 1 + 9
    assert all(float(r[2]) < float(r[4]) for r in table[1:])


def test_simulate_no_store(capsys):
    code, out, _ = run(capsys, "simulate", "--config", TINY, "--no-store", "--threads", "2")
    table = rows(out)
    assert table[0] == ["realization", "mean", "variance", "min", "max"]
    assert [r[0] for r in table[1:]] == ["0", "1", "2", "3"]
    assert all(float(r[3]) > 0 for r in table[1:])


def test_simulate_estimate_fit_chain(capsys, tmp_path):
    fields = tmp_path / "fields"
    assert run(capsys, "simulate", "--config", TINY, "--out", str(fields))[0] == 0
    header = json.loads((fields / "fields.json").read_text())
    assert header["files"] == [f"field_{i:04d}.bin" for i in range(4)]

    stored, live = tmp_path / "stored", tmp_path / "live"
    assert run(capsys, "estimate", "--config", TINY, "--fields", str(fields), "--out", str(stored))[0] == 0
    assert run(capsys, "estimate", "--config", TINY, "--out", str(live), "--threads", "2")[0] == 0
    for name in ("two_point_temporal_1_1.csv", "moments_spatial.csv", "moments_temporal.csv"):
        assert (stored / name).read_bytes() == (live / name).read_bytes()
    assert rows((stored / "moments_spatial.csv").read_text())[0] == ["l", "n", "Mn", "stderr"]
    assert rows((stored / "two_point_temporal_1_1.csv").read_text())[0] == ["lag", "estimate", "stderr"]

    code, out, _ = run(capsys, "fit", str(stored / "moments_spatial.csv"), "--where", "n=2")
    table = rows(out)
    assert table[0] == ["slope", "intercept", "r2", "lo", "hi", "npoints"]
    assert float(table[1][0]) < 0 and table[1][5] == "8"


def test_fit_reports_bad_input(capsys, tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("lag,estimate\n1,1\n2,0\n3,1\n4,1\n5,1\n")
    code, _, err = run(capsys, "fit", str(path))
    assert code == 2 and "point 1" in err


def test_verify_golden_schema_and_determinism(capsys, tmp_path):
    one, three = tmp_path / "t1", tmp_path / "t3"
    code1, out, _ = run(capsys, "verify", "--config", TINY, "--out", str(one), "--threads", "1")
    code3, _, _ = run(capsys, "verify", "--config", TINY, "--out", str(three), "--threads", "3")
    assert code1 == code3
    report = json.loads((one / "report.json").read_text())
    golden = json.loads((DATA / "report_schema.json").read_text())
    assert shape(report) == golden
    assert report["files"] == [
        "exponents_tau.csv",
        "exponents_mu.csv",
        "two_point_analytic.csv",
        "two_point_temporal_1_1.csv",
        "moments_spatial.csv",
        "moments_temporal.csv",
        "fits.csv",
    ]
    assert code1 == (0 if report["passed"] else 1)
    for name in report["files"]:
        assert (one / name).read_bytes() == (three / name).read_bytes(), name
    assert (one / "report.json").read_bytes() == (three / "report.json").read_bytes()
    assert "PASS exponent_identity_sum_h" in out
    assert (one / "report.txt").read_text() == out


def test_verify_spatial_and_temporal_moments_agree(capsys, tmp_path):
    run(capsys, "verify", "--config", TINY, "--out", str(tmp_path))
    fits = {f["quantity"]: f for f in json.loads((tmp_path / "report.json").read_text())["simulation"]["fits"]}
    for n in (2, 3):
        s, t = fits[f"moments_spatial_{n}"], fits[f"moments_temporal_{n}"]
        combined = math.hypot(s["slope_stderr"], t["slope_stderr"])
        assert abs(s["slope"] - t["slope"]) < 3 * combined


def test_verify_analytic_only(capsys, tmp_path):
    code, out, _ = run(capsys, "verify", "--config", TINY, "--analytic-only", "--out", str(tmp_path))
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert "simulation" not in report
    assert report["passed"] is True
    assert [c["name"] for c in report["checks"]] == ["exponent_identity_sum_h", "analytic_two_point_slope"]


def test_verify_rejects_invalid_config_before_compute(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("AMBITFIELD_BASIS__KIND", '"nig"')
    monkeypatch.setenv("AMBITFIELD_BASIS__ALPHA", "3.0")
    monkeypatch.setenv("AMBITFIELD_BASIS__BETA", "0.0")
    monkeypatch.setenv("AMBITFIELD_BASIS__DELTA", "1.0")
    monkeypatch.setenv("AMBITFIELD_ESTIMATE__MOMENT_ORDERS", "[2, 3, 4]")
    monkeypatch.setenv("AMBITFIELD_LATTICE__REALIZATIONS", "1")
    out_dir = tmp_path / "never"
    code, _, err = run(capsys, "verify", "--config", TINY, "--out", str(out_dir))
    assert code == 2
    assert "moment order 4" in err and "at least 2 realizations" in err
    assert not out_dir.exists()


def test_threads_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("AMBITFIELD_THREADS", "0")
    code, _, err = run(capsys, "simulate", "--config", TINY, "--no-store")
    assert code == 2 and "--threads" in err


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run(capsys, "exponents", "--config", str(tmp_path / "nope.toml"))
    assert code == 2 and "configuration" in err


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "ambitfield", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "0.1.0" in proc.stdout
