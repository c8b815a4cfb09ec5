import csv
import json
import os
import subprocess
import sys

import gmpy2
import pytest
from gmpy2 import mpfr

from pochxi._mp import working
from pochxi.afamily import bessel, step, xi_exact
from pochxi.approximant import build
from pochxi.cli import (
    EXIT_NEGATIVE,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    RunConfig,
    UsageError,
    main,
    read_config_file,
    read_table,
)

DATA = os.path.join(os.path.dirname(__file__), "..", "data")


def _csv_rows(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _meta(path):
    with open(path) as fh:
        return dict(ln[2:].strip().split(" = ", 1) for ln in fh if ln.startswith("# "))


# ---------------------------------------------------------------- config


def test_run_config_invariants():
    RunConfig(step())
    for kw in (dict(precision_bits=32), dict(n0=3), dict(n0=10, n_max=5), dict(format="xml"),
               dict(quad_tol=0)):
        with pytest.raises(UsageError):
            RunConfig(step(), **kw)


def test_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# bessel run\nvariant = bessel\na = 0.5   # weight scale\n"
                   "precision-bits = 128\n\nformat = json\n")
    raw = read_config_file(str(cfg))
    assert raw == {"variant": "bessel", "a": "0.5", "precision_bits": "128", "format": "json"}
    out = tmp_path / "x.json"
    assert main(["xi", "--spec", str(cfg), "--t", "1", "--out", str(out)]) == EXIT_OK
    meta, rows = read_table(str(out), 128)
    assert meta["spec"] == bessel("0.5").label and meta["precision_bits"] == 128
    with working(128):
        assert rows[0]["xi"] == xi_exact(bessel("0.5"), 1, 128)


def test_config_file_syntax_error(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("variant bessel\n")
    assert main(["xi", "--spec", str(bad), "--t", "1"]) == EXIT_USAGE


# ---------------------------------------------------------------- coeffs


def test_coeffs_step_table(tmp_path):
    out = tmp_path / "c.csv"
    assert main(["coeffs", "--spec", "step(w=1)", "--n", "3", "--beta", "1",
                 "--precision-bits", "192", "--out", str(out)]) == EXIT_OK
    rows = _csv_rows(out)
    assert [r["k"] for r in rows] == ["0", "1", "2", "3"]
    with working(192):
        q = 1 - gmpy2.exp(mpfr(-1))
        for r in rows:
            k = int(r["k"])
            # b_k = 4 q^{k+1} / (beta (k+1)) for the unit step
            assert abs(mpfr(r["b_k"]) - 4 * q ** (k + 1) / (k + 1)) < mpfr("1e-55")
    meta = _meta(out)
    assert meta["precision_bits"] == "192" and "achieved_tol" in meta
    mant = rows[0]["b_k"].split("e")[0].replace(".", "").lstrip("-0")
    assert len(mant) == 58  # ceil(192 * 0.302) significant digits


def test_coeffs_json_round_trip(tmp_path):
    out = tmp_path / "c.json"
    assert main(["coeffs", "--spec", "bessel(a=1)", "--n", "6", "--beta", "2.5",
                 "--format", "json", "--out", str(out)]) == EXIT_OK
    meta, rows = read_table(str(out))
    from pochxi.coefficients import coeff_vector

    cv = coeff_vector(bessel(), "2.5", range(7), 256, 1e-30)
    assert [r["b_k"] for r in rows] == list(cv.values)
    assert meta["digits"] == 78


@pytest.mark.parametrize("beta", ["0", "-1"])
def test_coeffs_rejects_bad_beta(beta):
    assert main(["coeffs", "--spec", "step(w=1)", "--n", "3", "--beta", beta]) == EXIT_USAGE


def test_deterministic_exports(tmp_path):
    paths = [tmp_path / f"{i}.csv" for i in range(2)]
    for p in paths:
        main(["coeffs", "--spec", "riemann", "--n", "5", "--beta", "3", "--out", str(p)])
    assert paths[0].read_bytes() == paths[1].read_bytes()


# ---------------------------------------------------------------- roots


def test_roots_exit_codes(tmp_path):
    assert main(["roots", "--spec", "riemann", "--n", "10", "--beta", "4",
                 "--out", str(tmp_path / "a.csv")]) == EXIT_OK
    out = tmp_path / "b.csv"
    assert main(["roots", "--spec", "riemann", "--n", "10", "--beta", "3",
                 "--out", str(out)]) == EXIT_NEGATIVE
    rows = _csv_rows(out)
    assert {"real", "complex"} == {r["kind"] for r in rows}
    assert _meta(out)["all_real"] == "False"


@pytest.mark.parametrize("argv", [
    ["roots", "--spec", "riemannn", "--n", "10", "--beta", "4"],
    ["roots", "--spec", "bessel(a=-2)", "--n", "10", "--beta", "4"],
    ["roots", "--n", "10", "--beta", "4"],
    ["roots", "--spec", "riemann", "--beta", "4"],
    ["nonsense"],
])
def test_usage_errors(argv):
    assert main(argv) == EXIT_USAGE


# ---------------------------------------------------------------- xi / remainder


def test_xi_step_at_pi(tmp_path):
    out = tmp_path / "x.json"
    with working(256):
        pi = str(gmpy2.const_pi())
    assert main(["xi", "--spec", "step(w=1)", "--t", pi, "--format", "json",
                 "--out", str(out)]) == EXIT_OK
    _, rows = read_table(str(out))
    assert abs(rows[0]["xi"]) <= mpfr("1e-25")


def test_remainder_is_direct_difference(tmp_path):
    out = tmp_path / "r.json"
    assert main(["remainder", "--spec", "bessel(a=1)", "--n", "12", "--beta", "2", "--t", "3",
                 "--format", "json", "--out", str(out)]) == EXIT_OK
    _, rows = read_table(str(out))
    outx = tmp_path / "x.json"
    main(["xi", "--spec", "bessel(a=1)", "--t", "3", "--format", "json", "--out", str(outx)])
    _, xrows = read_table(str(outx))
    with working(256):
        direct = xrows[0]["xi"] - build(bessel(), 12, 2).eval(3)
        assert abs(rows[0]["remainder"] - direct) <= mpfr("1e-20") * abs(direct)


# ---------------------------------------------------------------- trace / fit


def test_trace_and_resume(tmp_path):
    ck = tmp_path / "t.ckpt.json"
    a = tmp_path / "a.json"
    assert main(["trace", "--spec", "step(w=1)", "--n0", "4", "--n-max", "12",
                 "--resume", str(ck), "--format", "json", "--out", str(a)]) == EXIT_OK
    b = tmp_path / "b.json"
    assert main(["trace", "--spec", "step(w=1)", "--n0", "4", "--n-max", "20",
                 "--resume", str(ck), "--format", "json", "--out", str(b)]) == EXIT_OK
    c = tmp_path / "c.json"
    assert main(["trace", "--spec", "step(w=1)", "--n0", "4", "--n-max", "20",
                 "--format", "json", "--out", str(c)]) == EXIT_OK
    mb, rb = read_table(str(b))
    mc, rc = read_table(str(c))
    assert rb == rc
    assert [r["n"] for r in rb] == list(range(4, 21))
    assert mb["jumps"] == "6 17"


def test_trace_refuses_changed_precision(tmp_path):
    ck = tmp_path / "t.ckpt.json"
    main(["trace", "--spec", "step(w=1)", "--n0", "4", "--n-max", "6", "--resume", str(ck),
          "--out", str(tmp_path / "a.csv")])
    assert main(["trace", "--spec", "step(w=1)", "--n0", "4", "--n-max", "8", "--resume", str(ck),
                 "--precision-bits", "192", "--out", str(tmp_path / "b.csv")]) == EXIT_USAGE


def test_trace_needs_range():
    assert main(["trace", "--spec", "step(w=1)", "--n0", "4"]) == EXIT_USAGE


def test_trace_numeric_failure_exit(monkeypatch, tmp_path):
    from pochxi import cli
    from pochxi.rootfinder import BracketError

    def boom(*a, **k):
        raise BracketError("no onset")

    monkeypatch.setattr(cli, "run_trace", boom)
    assert main(["trace", "--spec", "step(w=1)", "--n0", "4", "--n-max", "6"]) == EXIT_NUMERIC


def test_fit_on_shipped_trace(tmp_path, traces):
    traces("riemann")
    out = tmp_path / "f.json"
    assert main(["fit", "--trace", os.path.join(DATA, "riemann.json"), "--n-lo", "10",
                 "--n-hi", "200", "--format", "json", "--out", str(out)]) == EXIT_OK
    doc = json.loads(out.read_text())
    assert 0.56 <= doc["params"]["c"] <= 0.76 and doc["n_range"] == [10, 200]


def test_fit_reads_csv_export(tmp_path, traces):
    traces("step_w1")
    out = tmp_path / "f.csv"
    assert main(["fit", "--trace", os.path.join(DATA, "step_w1.csv"), "--model", "pure_log",
                 "--n-lo", "10", "--out", str(out)]) == EXIT_OK
    head, row = out.read_text().splitlines()
    assert head.startswith("model,") and row.startswith("pure_log,")


def test_fit_missing_file():
    assert main(["fit", "--trace", "/nonexistent/trace.json"]) == EXIT_USAGE


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pochxi.cli", "roots", "--spec", "riemann",
                           "--n", "10", "--beta", "3", "--precision-bits", "128"],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_NEGATIVE
    assert proc.stdout.startswith("# spec = riemann")
