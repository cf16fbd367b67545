"""One complete run of a manufactured case on one mesh level.

Builds the discrete system, chooses consistent initial values, integrates,
and streams error norms, the energy balance and the compatibility residual.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .assemble import G_INTERPOLANT, LoadAssembler, assemble_operators
from .diagnostics import EnergyAccumulator, ErrorAccumulator, ErrorReport
from .mesh import mesh_size, unit_square
from .space import build_system
from .stationary import State, compatibility_residual, elliptic_projection
from .timeint import TimeGrid, integrate, lobatto_tableau


@dataclass
class LevelResult:
    level: int
    h: float
    tau: float
    n_steps: int
    errors: ErrorReport
    energy_residual_max: float
    compat_residual_max: float
    runtime: float


def setup(case, k: int, level: int, g_load: str = G_INTERPOLANT):
    """System, operators and load assembler for ``case`` on ``level``."""
    mesh = unit_square(level)
    sys = build_system(mesh, k, case.bc)
    ops = assemble_operators(sys, case.params)
    loads = LoadAssembler(ops, case.data_f, case.data_g, case.data_fdot, case.dirichlet,
                          g_load=g_load)
    return sys, ops, loads


def consistent_start(ops, case, loads, t0: float = 0.0) -> State:
    """Elliptic projection of the exact initial fields.

    It satisfies ``A u - B^T p = f(t0)`` on the free DOFs whenever the data
    ``f`` is consistent with the exact fields, which holds for every case.
    """
    st = elliptic_projection(ops, case, t0, functionals=loads.functionals)
    return State(st.u, st.p, t0)


def run_level(case, k: int, s: int, level: int, tau_ratio: float = 0.1, T: float = 0.5,
              g_load: str = G_INTERPOLANT, track_energy: bool = True,
              track_compat: bool = True) -> LevelResult:
    start = time.perf_counter()
    sys, ops, loads = setup(case, k, level, g_load)
    h = mesh_size(sys.mesh)
    grid = TimeGrid.from_step(T, tau_ratio * h)
    tab = lobatto_tableau(s)
    x0 = consistent_start(ops, case, loads)

    errs = ErrorAccumulator(sys, case)
    errs.add(x0)
    energy = EnergyAccumulator(ops, loads, tab, x0) if track_energy else None
    compat = [compatibility_residual(ops, x0, loads.f(0.0))] if track_compat else [0.0]

    def callback(n, state, rec):
        errs.add(state)
        if energy is not None:
            energy.update(rec)
        if track_compat:
            compat.append(compatibility_residual(ops, state, loads.f(state.t)))

    integrate(ops, tab, grid, x0, loads.rhs, callback=callback,
              keep_states=False, keep_stages=False)
    runtime = time.perf_counter() - start
    e_res = energy.report().max_residual if energy is not None else 0.0
    return LevelResult(
        level=level,
        h=h,
        tau=grid.tau,
        n_steps=grid.N,
        errors=errs.report(runtime),
        energy_residual_max=e_res,
        compat_residual_max=float(np.max(compat)),
        runtime=runtime,
    )
