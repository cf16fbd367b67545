from fractions import Fraction as Fr
import math
import warnings

import numpy as np
import pytest
import scipy.linalg as sla

from biotfem.assemble import LoadAssembler, assemble_operators
from biotfem.cases import biot_sine_case, polynomial_case
from biotfem.mesh import unit_square
from biotfem.space import build_system
from biotfem.stationary import State, compatibility_residual, elliptic_projection
from biotfem.timeint import (
    ButcherTableau,
    LobattoStepper,
    TimeGrid,
    integrate,
    lobatto_tableau,
    order_condition_defect,
    step,
)


def _setup(case, level=1, k=1):
    sys = build_system(unit_square(level), k, case.bc)
    ops = assemble_operators(sys, case.params)
    loads = LoadAssembler(ops, case.data_f, case.data_g, case.data_fdot, case.dirichlet)
    x0 = elliptic_projection(ops, case, 0.0, functionals=loads.functionals)
    return sys, ops, loads, x0


# -- tableaux ---------------------------------------------------------------


def _as_float(rows):
    return np.array([[float(v) for v in r] for r in rows])


def test_tableau_two_stages_is_trapezoid():
    tab = lobatto_tableau(2)
    np.testing.assert_allclose(tab.a, [[0, 0], [0.5, 0.5]], atol=1e-15)
    np.testing.assert_allclose(tab.c, [0, 1], atol=1e-15)


def test_tableau_three_stages():
    tab = lobatto_tableau(3)
    a = _as_float([[0, 0, 0], [Fr(5, 24), Fr(1, 3), Fr(-1, 24)], [Fr(1, 6), Fr(2, 3), Fr(1, 6)]])
    np.testing.assert_allclose(tab.a, a, atol=1e-15)
    np.testing.assert_allclose(tab.b, [1 / 6, 2 / 3, 1 / 6], atol=1e-15)
    np.testing.assert_allclose(tab.c, [0, 0.5, 1], atol=1e-15)


def test_tableau_four_stages():
    r5 = math.sqrt(5)
    a = np.array([
        [0, 0, 0, 0],
        [(11 + r5) / 120, (25 - r5) / 120, (25 - 13 * r5) / 120, (-1 + r5) / 120],
        [(11 - r5) / 120, (25 + 13 * r5) / 120, (25 + r5) / 120, (-1 - r5) / 120],
        [1 / 12, 5 / 12, 5 / 12, 1 / 12],
    ])
    tab = lobatto_tableau(4)
    np.testing.assert_allclose(tab.a, a, atol=1e-14)
    np.testing.assert_allclose(tab.c, [0, (5 - r5) / 10, (5 + r5) / 10, 1], atol=1e-14)


@pytest.mark.parametrize("s", [2, 3, 4])
def test_order_conditions(s):
    tab = lobatto_tableau(s)
    assert order_condition_defect(tab) < 1e-14
    # the quadrature (b, c) integrates polynomials up to degree 2s - 3
    for m in range(2 * s - 2):
        assert abs(tab.b @ tab.c**m - 1 / (m + 1)) < 1e-14
    np.testing.assert_allclose(tab.a.sum(axis=1), tab.c, atol=1e-15)


def test_order_condition_defect_flags_perturbation():
    tab = lobatto_tableau(3)
    a = tab.a.copy()
    a[1:] *= 1.05
    assert order_condition_defect(ButcherTableau(3, a, tab.b, tab.c)) > 1e-3


def test_time_grid():
    g = TimeGrid.from_step(0.5, 0.0125)
    assert g.N == 40 and abs(g.tau - 0.0125) < 1e-15
    assert g.times[-1] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        TimeGrid(0.5, 0)
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 3)


# -- single steps against dense oracles ---------------------------------------


def _dense_lobatto_step(M, N, tab, tau, x, rhs_vec, t):
    """All ``s`` stage equations as one dense linear system."""
    s, n = tab.s, x.size
    big = np.kron(np.eye(s), M) + tau * np.kron(tab.a, N)
    r = np.concatenate([rhs_vec(t + ci * tau) - N @ x for ci in tab.c])
    Kst = sla.solve(big, r).reshape(s, n)
    return x + tau * tab.b @ Kst


@pytest.mark.parametrize("s", [2, 3, 4])
@pytest.mark.parametrize("solver", ["decoupled", "coupled"])
def test_step_matches_dense_oracle(s, solver, rng):
    case = biot_sine_case()
    _, ops, loads, _ = _setup(case, level=1, k=1)
    tab = lobatto_tableau(s)
    tau = 0.03
    x = rng.standard_normal(ops.n_u + ops.n_p)
    stepper = LobattoStepper(ops, tab, tau, stage_solver=solver)
    rec = stepper.step(x, 0.1, loads.rhs)
    x1 = stepper.advance(x, rec, tab)
    np.testing.assert_allclose(rec.values[-1], x1, atol=1e-12)  # stiffly accurate
    M = ops.saddle().toarray()
    N = ops.dissipation().toarray()
    ref = _dense_lobatto_step(M, N, tab, tau, x, lambda t: np.concatenate(loads.rhs(t)), 0.1)
    np.testing.assert_allclose(x1, ref, atol=1e-11 * max(1, np.abs(ref).max()))


def test_two_stage_is_crank_nicolson(rng):
    case = biot_sine_case()
    _, ops, loads, _ = _setup(case)
    tab = lobatto_tableau(2)
    tau = 0.05
    M = ops.saddle().toarray()
    N = ops.dissipation().toarray()
    x = rng.standard_normal(M.shape[0])
    r0, r1 = (np.concatenate(loads.rhs(t)) for t in (0.2, 0.2 + tau))
    x_cn = sla.solve(M / tau + N / 2, (M / tau - N / 2) @ x + (r0 + r1) / 2)
    st = step(ops, tab, State.from_vector(x, ops.n_u, 0.2), tau, loads.rhs)
    np.testing.assert_allclose(st.vector(), x_cn, atol=1e-11)
    assert st.t == pytest.approx(0.2 + tau)


@pytest.mark.parametrize("s", [3, 4])
def test_decoupled_and_coupled_agree(s, rng):
    case = biot_sine_case()
    _, ops, loads, _ = _setup(case, level=2, k=2)
    tab = lobatto_tableau(s)
    x = rng.standard_normal(ops.n_u + ops.n_p)
    a = LobattoStepper(ops, tab, 0.02, "decoupled").step(x, 0.0, loads.rhs).values
    b = LobattoStepper(ops, tab, 0.02, "coupled").step(x, 0.0, loads.rhs).values
    np.testing.assert_allclose(a, b, atol=1e-12 * np.abs(b).max())


def test_stepper_validation():
    _, ops = assemble_ops_small()
    with pytest.raises(ValueError):
        LobattoStepper(ops, lobatto_tableau(2), 0.0)
    with pytest.raises(ValueError):
        LobattoStepper(ops, lobatto_tableau(2), 0.1, stage_solver="gmres")


def assemble_ops_small():
    case = biot_sine_case()
    sys = build_system(unit_square(1), 1, case.bc)
    return sys, assemble_operators(sys, case.params)


# -- trajectories ------------------------------------------------------------


@pytest.mark.parametrize("s,order", [(2, 2), (3, 4)])
def test_temporal_convergence_order(s, order):
    case = biot_sine_case()
    _, ops, loads, x0 = _setup(case, level=1, k=1)
    tab = lobatto_tableau(s)
    T = 0.2

    def final(N):
        return integrate(ops, tab, TimeGrid(T, N), x0, loads.rhs,
                         keep_stages=False).states[-1].vector()

    ref = final(256)
    errs = [np.abs(final(N) - ref).max() for N in (8, 16)]
    rate = math.log2(errs[0] / errs[1])
    assert abs(rate - order) < 0.3


@pytest.mark.parametrize("s", [2, 3])
def test_time_constant_problem_stays_stationary(s):
    case = polynomial_case(1, time_constant=True)
    _, ops, loads, x0 = _setup(case, level=2)
    traj = integrate(ops, lobatto_tableau(s), TimeGrid(0.5, 10), x0, loads.rhs)
    for st in traj.states:
        np.testing.assert_allclose(st.vector(), x0.vector(), atol=1e-12)


@pytest.mark.parametrize("s", [2, 3, 4])
def test_compatibility_preserved_for_polynomial_forcing(s):
    case = polynomial_case(2)
    _, ops, loads, x0 = _setup(case, level=1, k=2)
    traj = integrate(ops, lobatto_tableau(s), TimeGrid(0.5, 7), x0, loads.rhs, f_vec=loads.f)
    for st in traj.states:
        assert compatibility_residual(ops, st, loads.f(st.t)) <= 1e-10


def test_integrate_warns_for_incompatible_start(rng):
    case = biot_sine_case()
    _, ops, loads, _ = _setup(case)
    bad = State(rng.standard_normal(ops.n_u), rng.standard_normal(ops.n_p))
    with pytest.warns(UserWarning, match="compatibility"):
        integrate(ops, lobatto_tableau(2), TimeGrid(0.1, 2), bad, loads.rhs, f_vec=loads.f)


def test_integrate_streaming_callback():
    case = biot_sine_case()
    _, ops, loads, x0 = _setup(case)
    seen = []
    traj = integrate(ops, lobatto_tableau(3), TimeGrid(0.1, 4), x0, loads.rhs,
                     callback=lambda n, st, rec: seen.append((n, st.t, rec.times.size)),
                     keep_states=False, keep_stages=False)
    assert not traj.states and not traj.stage_records
    assert [n for n, _, _ in seen] == [1, 2, 3, 4]
    assert seen[-1][1] == pytest.approx(0.1) and seen[0][2] == 3


def test_integrate_is_deterministic():
    case = biot_sine_case()
    _, ops, loads, x0 = _setup(case)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        a = integrate(ops, lobatto_tableau(3), TimeGrid(0.1, 3), x0, loads.rhs)
        b = integrate(ops, lobatto_tableau(3), TimeGrid(0.1, 3), x0, loads.rhs)
    np.testing.assert_array_equal(a.states[-1].vector(), b.states[-1].vector())
