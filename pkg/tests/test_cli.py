import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from biotfem.cli import (
    CSV_COLUMNS,
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_USAGE,
    ConfigError,
    RunConfig,
    convergence_rows,
    energy_checks,
    format_csv,
    main,
    parse_levels,
    read_config_file,
)
from biotfem.diagnostics import ErrorReport
from biotfem.study import LevelResult

FAST = ["--T", "0.05"]


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- parsing ----------------------------------------------------------------


@pytest.mark.parametrize("text,expected", [("3..6", (3, 4, 5, 6)), ("3,5", (3, 5)),
                                           ("4", (4,)), (" 1..1 ", (1,))])
def test_parse_levels(text, expected):
    assert parse_levels(text) == expected


@pytest.mark.parametrize("text", ["", "5..3", "a..b", "-1", "1,,x"])
def test_parse_levels_rejects(text):
    with pytest.raises(ConfigError):
        parse_levels(text)


def test_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# ladder\ncase = polynomial\nk = 2  # degree\nlevels = 1..2\n"
                 "emit_plots = yes\n\nT = 0.25\n")
    vals = read_config_file(str(p))
    assert vals == {"case": "polynomial", "k": 2, "levels": (1, 2), "emit_plots": True, "T": 0.25}


@pytest.mark.parametrize("body,lineno", [("k = 1\nbogus = 3\n", 2),
                                         ("k = 1\n\ns = two\n", 3),
                                         ("levels 3..4\n", 1),
                                         ("# c\nlevels = 4..2\n", 2)])
def test_config_errors_carry_line_numbers(tmp_path, body, lineno):
    p = tmp_path / "bad.cfg"
    p.write_text(body)
    with pytest.raises(ConfigError, match=rf"bad\.cfg:{lineno}:"):
        read_config_file(str(p))


def test_run_config_validation():
    for kw in ({"s": 1}, {"k": 4}, {"case": "x"}, {"levels": ()}, {"tau_ratio": 0.0},
               {"T": float("inf")}, {"g_load": "lumped"}):
        with pytest.raises(ConfigError):
            RunConfig(**kw)


# -- exit codes -------------------------------------------------------------


def test_usage_errors(capsys, tmp_path):
    assert main(["convergence", "--levels", ""]) == EXIT_USAGE
    assert main(["infsup", "--levels", "3..1"]) == EXIT_USAGE
    assert main(["convergence", "--s", "1"]) == EXIT_USAGE
    assert main(["nonsense"]) == EXIT_USAGE
    assert main(["convergence", "--config", str(tmp_path / "missing.cfg")]) == EXIT_USAGE
    bad = tmp_path / "bad.cfg"
    bad.write_text("k = 1\nk2 = 1\n")
    assert main(["convergence", "--config", str(bad)]) == EXIT_USAGE
    assert "bad.cfg:2" in capsys.readouterr().err


def test_flags_override_config(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("case = polynomial\nlevels = 1..3\nT = 0.05\n")
    assert main(["convergence", "--config", str(cfg), "--levels", "1..2"]) == EXIT_OK
    assert len(_rows(capsys.readouterr().out)) == 2


# -- convergence ------------------------------------------------------------


def test_convergence_csv_schema(capsys):
    assert main(["convergence", "--levels", "1..2", *FAST]) == EXIT_OK
    text = capsys.readouterr().out
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    rows = _rows(text)
    assert [r["level"] for r in rows] == ["1", "2"]
    assert rows[0]["eoc_u"] == rows[0]["eoc_p_L2"] == rows[0]["eoc_p_H1"] == ""
    assert all(rows[1][c] != "" for c in ("eoc_u", "eoc_p_L2", "eoc_p_H1"))
    assert rows[0]["runtime_s"] == ""
    for key in ("h", "tau", "err_u_infH1", "energy_residual_max"):
        mantissa, exp = rows[1][key].split("e")
        assert len(mantissa.replace(".", "").lstrip("-")) == 6 and exp[0] in "+-"
    assert float(rows[1]["h"]) == 0.25 and float(rows[1]["tau"]) == pytest.approx(0.025)


def test_polynomial_ladder_is_exact(capsys):
    assert main(["convergence", "--case", "polynomial", "--levels", "1..2", *FAST]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    for r in rows:
        for c in ("err_u_infH1", "err_p_infL2", "err_p_l2H1"):
            assert float(r[c]) <= 1e-9
        assert r["eoc_u"] == r["eoc_p_L2"] == r["eoc_p_H1"] == ""


def test_convergence_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["convergence", "--levels", "1..2", *FAST, "--out", str(path)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_output_side_files(tmp_path):
    out = tmp_path / "conv.csv"
    assert main(["convergence", "--levels", "1", *FAST, "--out", str(out), "--emit_plots",
                 "--timing"]) == EXIT_OK
    meta = json.loads((tmp_path / "conv.csv.meta.json").read_text())
    assert meta["T"] == 0.05 and meta["k"] == 1 and "err_u_infH1" in meta["norms"]
    script = (tmp_path / "conv.csv.gp").read_text()
    assert "set logscale xy" in script and str(out) in script and "x**2" in script
    assert _rows(out.read_text())[0]["runtime_s"] != ""


def _level_result(level, e):
    errs = ErrorReport(e, e, e, 10, 5)
    return LevelResult(level, 2.0**-level, 0.1 * 2.0**-level, 1, errs, 0.0, 0.0, 1.0)


def test_nonfinite_values_abort():
    from biotfem.cli import NumericalFailure

    with pytest.raises(NumericalFailure):
        convergence_rows([_level_result(1, float("nan"))])


def test_error_floor_suppresses_rates():
    rows = convergence_rows([_level_result(1, 1e-3), _level_result(2, 1e-12)])
    assert rows[1]["eoc_u"] is None
    rows = convergence_rows([_level_result(1, 4e-3), _level_result(2, 1e-3)])
    assert rows[1]["eoc_u"] == pytest.approx(2.0)
    assert "runtime_s" in format_csv(rows).splitlines()[0]


# -- infsup and energy-check ------------------------------------------------


def test_infsup_command(capsys):
    assert main(["infsup", "--k", "1", "--levels", "1..3"]) == EXIT_OK
    rows = _rows(capsys.readouterr().out)
    beta = np.array([float(r["beta_h"]) for r in rows])
    assert len(beta) == 3 and np.all(beta > 0) and beta.max() / beta.min() < 1.25


def test_energy_check_default_passes(capsys):
    assert main(["energy-check", "--levels", "2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count(" ok") == 2


def test_energy_check_corrupted_tableau_fails(capsys):
    assert main(["energy-check", "--levels", "2", "--s", "3", "--corrupt-tableau"]) == \
        EXIT_NUMERICAL
    assert "FAILED at node" in capsys.readouterr().out


def test_zero_start_and_zero_data_give_zero_residuals():
    from biotfem.cases import biot_sine_case
    from biotfem.diagnostics import EnergyAccumulator
    from biotfem.stationary import State
    from biotfem.study import setup
    from biotfem.timeint import TimeGrid, integrate, lobatto_tableau

    _, ops, _ = setup(biot_sine_case(), 1, 1)
    tab = lobatto_tableau(3)
    x0 = State(np.zeros(ops.n_u), np.zeros(ops.n_p))
    zero = (np.zeros(ops.n_u), np.zeros(ops.n_p))
    acc = EnergyAccumulator(ops, None, tab, x0)
    integrate(ops, tab, TimeGrid(0.1, 5), x0, lambda t: zero,
              callback=lambda n, st, rec: acc.update(rec), keep_states=False)
    rep = acc.report()
    assert np.all(rep.residual == 0.0) and np.all(rep.energy == 0.0)


def test_energy_checks_report_both_runs():
    checks = energy_checks(1, 2, 1, steps_decay=5, steps_identity=3, seed=0)
    assert [c.name for c in checks] == ["homogeneous", "polynomial_data"]
    assert all(c.first_violation() is None for c in checks)


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "biotfem", "infsup", "--levels", "1"],
                         capture_output=True, text=True)
    assert out.returncode == 0
    assert out.stdout.splitlines()[0] == "level,h,beta_h"
    out = subprocess.run([sys.executable, "-m", "biotfem", "infsup", "--k", "9"],
                         capture_output=True, text=True)
    assert out.returncode == 2
