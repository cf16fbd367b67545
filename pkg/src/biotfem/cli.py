"""Command-line driver: convergence ladders, inf-sup constants, energy checks.

Configuration comes from an optional flat ``key = value`` file (``--config``)
overridden by command-line flags named after the :class:`RunConfig` fields.

Exit status: 0 on success, 1 on numerical failure, 2 on usage or
configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import kernels
from .assemble import G_INTERPOLANT, G_LOAD_MODES, assemble_operators
from .cases import biot_sine_case, get_case, polynomial_case
from .diagnostics import EnergyAccumulator, eoc
from .mesh import unit_square
from .solver import ConvergenceError, SingularMatrixError, factor
from .space import build_system
from .stationary import State, dense_infsup_constant, infsup_constant
from .study import run_level, setup
from .timeint import ButcherTableau, TimeGrid, integrate, lobatto_tableau

log = logging.getLogger("biotfem")

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2

CASES = ("biot_sine", "polynomial")
ERROR_FLOOR = 1e-9
ENERGY_TOL = 1e-9

CSV_COLUMNS = (
    "level", "h", "tau", "dofs_u", "dofs_p",
    "err_u_infH1", "eoc_u", "err_p_infL2", "eoc_p_L2", "err_p_l2H1", "eoc_p_H1",
    "energy_residual_max", "compat_residual_max", "runtime_s",
)


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


def parse_levels(text: str) -> tuple:
    """``"3..6"``, ``"3,4,5"`` or ``"4"`` to a tuple of levels."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = (int(v) for v in text.split(".."))
            levels = tuple(range(lo, hi + 1))
        else:
            levels = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"invalid level range {text!r}") from exc
    if not levels:
        raise ConfigError(f"empty level range {text!r}")
    if min(levels) < 0:
        raise ConfigError(f"levels must be nonnegative, got {text!r}")
    return levels


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"invalid boolean {text!r}")


@dataclass(frozen=True)
class RunConfig:
    case: str = "biot_sine"
    k: int = 1
    s: int = 2
    levels: tuple = (3, 4, 5, 6)
    tau_ratio: float = 0.1
    T: float = 0.5
    output: str | None = None
    emit_plots: bool = False
    g_load: str = G_INTERPOLANT
    timing: bool = False

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigError(f"case must be one of {CASES}, got {self.case!r}")
        if not 1 <= self.k <= 3:
            raise ConfigError(f"k must be in 1..3, got {self.k}")
        if not 2 <= self.s <= 4:
            raise ConfigError(f"s must be in 2..4, got {self.s}")
        if not self.levels:
            raise ConfigError("levels must be nonempty")
        if not (self.tau_ratio > 0 and math.isfinite(self.tau_ratio)):
            raise ConfigError(f"tau_ratio must be positive, got {self.tau_ratio}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError(f"T must be positive, got {self.T}")
        if self.g_load not in G_LOAD_MODES:
            raise ConfigError(f"g_load must be one of {G_LOAD_MODES}, got {self.g_load!r}")


_CONVERTERS = {
    "case": str,
    "k": int,
    "s": int,
    "levels": parse_levels,
    "tau_ratio": float,
    "T": float,
    "output": str,
    "emit_plots": _parse_bool,
    "g_load": str,
    "timing": _parse_bool,
}


def _convert(key, value):
    try:
        return _CONVERTERS[key](value)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value {value!r} for {key}") from exc


def read_config_file(path: str) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _CONVERTERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(key, value)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
    return values


# --------------------------------------------------------------------------
# output


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.5e}"


def _check_finite(row: dict):
    for key, v in row.items():
        if isinstance(v, float) and not math.isfinite(v):
            raise NumericalFailure(f"non-finite value in column {key}")


def convergence_rows(results, timing: bool = False) -> list:
    rows = []
    cols = (("err_u_infH1", "eoc_u", "e_u_inf_H1"),
            ("err_p_infL2", "eoc_p_L2", "e_p_inf_L2"),
            ("err_p_l2H1", "eoc_p_H1", "e_p_l2_H1"))
    for i, r in enumerate(results):
        row = {"level": r.level, "h": r.h, "tau": r.tau,
               "dofs_u": r.errors.dofs_u, "dofs_p": r.errors.dofs_p}
        for col, rate_col, attr in cols:
            e = getattr(r.errors, attr)
            row[col] = e
            rate = None
            if i > 0:
                prev = getattr(results[i - 1].errors, attr)
                if e > ERROR_FLOOR and prev > ERROR_FLOOR:
                    rate = eoc([prev, e], [results[i - 1].h, r.h])[0]
            row[rate_col] = rate
        row["energy_residual_max"] = r.energy_residual_max
        row["compat_residual_max"] = r.compat_residual_max
        row["runtime_s"] = r.runtime if timing else None
        _check_finite(row)
        rows.append(row)
    return rows


def format_csv(rows, columns=CSV_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _write(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def plot_script(csv_path: str, k: int) -> str:
    """gnuplot script: error against h, log-log, with slope-(k+1) and slope-k guides."""
    name = csv_path.replace("'", "")
    return "\n".join([
        "set datafile separator ','",
        "set logscale xy",
        "set key top left",
        "set xlabel 'h'",
        "set ylabel 'relative error'",
        "set terminal pngcairo",
        f"set output '{name}.png'",
        f"plot '{name}' every ::1 using 2:6 with linespoints title 'u, Linf(H1)', \\",
        "     '' every ::1 using 2:8 with linespoints title 'p, Linf(L2)', \\",
        "     '' every ::1 using 2:10 with linespoints title 'p, l2(H1)', \\",
        f"     x**{k + 1} with lines dashtype 2 title 'h^{k + 1}', \\",
        f"     x**{k} with lines dashtype 3 title 'h^{k}'",
        "",
    ])


def metadata(cfg: RunConfig) -> dict:
    return {
        "case": cfg.case,
        "k": cfg.k,
        "s": cfg.s,
        "levels": list(cfg.levels),
        "tau_ratio": cfg.tau_ratio,
        "T": cfg.T,
        "g_load": cfg.g_load,
        "norms": {
            "err_u_infH1": "max_n ||u - U^n||_H1 / max_n ||u(t^n)||_H1, full H1 norm, n = 0..N",
            "err_p_infL2": "max_n ||p - P^n||_L2 / max_n ||p(t^n)||_L2, n = 0..N",
            "err_p_l2H1": "(sum_n tau ||p - P^n||_H1^2 / sum_n tau ||p(t^n)||_H1^2)^(1/2), n = 1..N",
        },
        "kernel_backend": kernels.BACKEND,
    }


# --------------------------------------------------------------------------
# commands


def cmd_convergence(cfg: RunConfig) -> int:
    case = get_case(cfg.case, cfg.k)
    results = []
    log.info("convergence: case=%s k=%d s=%d T=%g tau_ratio=%g g_load=%s",
             cfg.case, cfg.k, cfg.s, cfg.T, cfg.tau_ratio, cfg.g_load)
    for level in cfg.levels:
        r = run_level(case, cfg.k, cfg.s, level, cfg.tau_ratio, cfg.T, g_load=cfg.g_load)
        log.info("level %d: %d steps, %.2f s", level, r.n_steps, r.runtime)
        results.append(r)
    rows = convergence_rows(results, timing=cfg.timing)
    _write(format_csv(rows), cfg.output)
    if cfg.output is not None:
        with open(cfg.output + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(metadata(cfg), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if cfg.emit_plots:
            with open(cfg.output + ".gp", "w", encoding="utf-8") as fh:
                fh.write(plot_script(cfg.output, cfg.k))
    return EXIT_OK


def infsup_rows(cfg: RunConfig, dense_check_max_dofs: int = 0) -> list:
    case = get_case(cfg.case, cfg.k)
    rows = []
    for level in cfg.levels:
        sys_ = build_system(unit_square(level), cfg.k, case.bc)
        ops = assemble_operators(sys_, case.params)
        res = infsup_constant(ops)
        row = {"level": level, "h": 1.0 / 2**level, "beta_h": res.beta_h}
        if ops.n_u + ops.n_p <= dense_check_max_dofs:
            row["beta_h_dense"] = dense_infsup_constant(ops)
        _check_finite(row)
        rows.append(row)
    return rows


def cmd_infsup(cfg: RunConfig) -> int:
    rows = infsup_rows(cfg)
    for r in rows:
        if not r["beta_h"] > 0:
            raise NumericalFailure(f"inf-sup constant not positive at level {r['level']}")
    _write(format_csv(rows, ("level", "h", "beta_h")), cfg.output)
    return EXIT_OK


def corrupt(tableau: ButcherTableau, delta: float = 0.05) -> ButcherTableau:
    """A deliberately inconsistent tableau, used as a negative control."""
    a = tableau.a.copy()
    a[1:] *= 1.0 + delta
    return ButcherTableau(tableau.s, a, tableau.b.copy(), tableau.c.copy())


@dataclass
class EnergyCheck:
    name: str
    residuals: np.ndarray
    energies: np.ndarray
    require_decay: bool

    def first_violation(self, tol: float = ENERGY_TOL):
        """Index of the first node breaking the identity or the decay, else ``None``."""
        bad = list(np.flatnonzero(self.residuals > tol))
        if self.require_decay:
            bad += [n + 1 for n in np.flatnonzero(np.diff(self.energies) > 0)]
        return int(min(bad)) if bad else None


def energy_checks(k: int, s: int, level: int, tau_ratio: float = 0.1,
                  tableau: ButcherTableau | None = None, steps_decay: int = 50,
                  steps_identity: int = 20, seed: int = 0) -> list:
    """Homogeneous decay run and polynomial-data identity run."""
    tab = tableau or lobatto_tableau(s)
    h = 1.0 / 2**level
    rng = np.random.default_rng(seed)
    out = []

    # homogeneous data, nonzero compatible start
    case = biot_sine_case()
    sys_, ops, _ = setup(case, k, level)
    fA = factor(ops.A, role="spd")
    p0 = rng.standard_normal(ops.n_p)
    x0 = State(fA.solve(ops.B.T @ p0), p0, 0.0)
    zero = (np.zeros(ops.n_u), np.zeros(ops.n_p))
    acc = EnergyAccumulator(ops, None, tab, x0)
    integrate(ops, tab, TimeGrid(steps_decay * tau_ratio * h, steps_decay), x0,
              lambda t: zero, callback=lambda n, st, rec: acc.update(rec),
              keep_states=False, keep_stages=False)
    rep = acc.report()
    out.append(EnergyCheck("homogeneous", rep.residual, rep.energy, True))

    # data polynomial in time of degree s - 2, perturbed compatible start
    pcase = polynomial_case(k, time_constant=(s == 2))
    _, ops, loads = setup(pcase, k, level)
    fA = factor(ops.A, role="spd")
    p0 = rng.standard_normal(ops.n_p)
    x0 = State(fA.solve(loads.f(0.0) + ops.B.T @ p0), p0, 0.0)
    acc = EnergyAccumulator(ops, loads, tab, x0)
    integrate(ops, tab, TimeGrid(steps_identity * tau_ratio * h, steps_identity), x0,
              loads.rhs, callback=lambda n, st, rec: acc.update(rec),
              keep_states=False, keep_stages=False)
    rep = acc.report()
    out.append(EnergyCheck("polynomial_data", rep.residual, rep.energy, False))
    return out


def cmd_energy_check(cfg: RunConfig, corrupt_tableau: bool = False) -> int:
    tab = lobatto_tableau(cfg.s)
    if corrupt_tableau:
        tab = corrupt(tab)
    level = cfg.levels[0]
    status = EXIT_OK
    lines = []
    for chk in energy_checks(cfg.k, cfg.s, level, cfg.tau_ratio, tableau=tab):
        bad = chk.first_violation()
        verdict = "ok" if bad is None else f"FAILED at node {bad}"
        lines.append(f"{chk.name}: k={cfg.k} s={cfg.s} level={level} "
                     f"max_residual={chk.residuals.max():.3e} {verdict}")
        if bad is not None:
            status = EXIT_NUMERICAL
    _write("\n".join(lines) + "\n", cfg.output)
    return status


# --------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biotfem",
        description="Taylor-Hood / Lobatto-IIIA solver for the quasistatic Biot system.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--case", choices=CASES)
        p.add_argument("--k", type=int, help="pressure degree (displacement degree k+1)")
        p.add_argument("--s", type=int, help="number of Lobatto stages")
        p.add_argument("--levels", help="mesh levels, e.g. 3..6 or 3,4")
        p.add_argument("--tau_ratio", type=float, help="time step tau = tau_ratio * h")
        p.add_argument("--T", type=float, help="final time")
        p.add_argument("--output", "--out", dest="output", help="output path (default stdout)")
        p.add_argument("--g_load", choices=G_LOAD_MODES, help="treatment of the mass source")
        return p

    conv = common(sub.add_parser("convergence", help="run a convergence ladder, write CSV"))
    conv.add_argument("--emit_plots", action="store_const", const=True, default=None,
                      help="also write a gnuplot script next to the CSV")
    conv.add_argument("--timing", action="store_const", const=True, default=None,
                      help="fill the runtime_s column (output no longer reproducible)")
    common(sub.add_parser("infsup", help="discrete inf-sup constants per level"))
    en = common(sub.add_parser("energy-check", help="energy identity and decay checks"))
    en.add_argument("--corrupt-tableau", action="store_true", help=argparse.SUPPRESS)
    return parser


_COMMAND_DEFAULTS = {
    "infsup": {"levels": (1, 2, 3, 4)},
    "energy-check": {"levels": (3,)},
}


def config_from_args(args) -> RunConfig:
    values = dict(_COMMAND_DEFAULTS.get(args.command, {}))
    if args.config:
        values.update(read_config_file(args.config))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = _convert(f.name, v)
    return RunConfig(**values)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"biotfem: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            if args.command == "convergence":
                return cmd_convergence(cfg)
            if args.command == "infsup":
                return cmd_infsup(cfg)
            return cmd_energy_check(cfg, corrupt_tableau=args.corrupt_tableau)
    except (NumericalFailure, SingularMatrixError, ConvergenceError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        print(f"biotfem: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"biotfem: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


__all__ = ["RunConfig", "ConfigError", "main", "build_parser"]
