import numpy as np
import pytest

from biotfem.assemble import LoadAssembler, assemble_operators
from biotfem.cases import biot_sine_case, polynomial_case
from biotfem.mesh import unit_square
from biotfem.space import build_system, interpolate
from biotfem.stationary import (
    State,
    compatibility_residual,
    dense_infsup_constant,
    elliptic_projection,
    infsup_constant,
    schur_pressure_check,
    solve_initial_given_p0,
    solve_initial_given_phi0,
)
from biotfem.timeint import TimeGrid, integrate, lobatto_tableau

from conftest import make_ops


def _sine(level=2, k=1):
    case = biot_sine_case()
    sys = build_system(unit_square(level), k, case.bc)
    ops = assemble_operators(sys, case.params)
    loads = LoadAssembler(ops, case.data_f, case.data_g, case.data_fdot)
    return case, sys, ops, loads


def test_initial_from_p0_is_compatible(rng):
    _, _, ops, loads = _sine()
    st = solve_initial_given_p0(ops, loads.f(0.0), rng.standard_normal(ops.n_p))
    assert compatibility_residual(ops, st, loads.f(0.0)) <= 1e-10


def test_initial_from_phi0_is_compatible(rng):
    _, _, ops, loads = _sine()
    phi0 = rng.standard_normal(ops.n_p)
    st = solve_initial_given_phi0(ops, loads.f(0.0), phi0)
    assert compatibility_residual(ops, st, loads.f(0.0)) <= 1e-10
    np.testing.assert_allclose(ops.B @ st.u, phi0, atol=1e-10)


def test_compatibility_residual_detects_violation(rng):
    _, _, ops, loads = _sine()
    st = State(rng.standard_normal(ops.n_u), rng.standard_normal(ops.n_p))
    assert compatibility_residual(ops, st, loads.f(0.0)) > 1e-3


def test_state_vector_roundtrip(rng):
    st = State(rng.standard_normal(4), rng.standard_normal(3), 0.25)
    back = State.from_vector(st.vector(), 4, 0.25)
    np.testing.assert_array_equal(back.u, st.u)
    np.testing.assert_array_equal(back.p, st.p)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_elliptic_projection_exact_for_polynomials(k):
    case = polynomial_case(k)
    sys = build_system(unit_square(1), k, case.bc)
    ops = assemble_operators(sys, case.params)
    st = elliptic_projection(ops, case, 0.4)
    u = interpolate(sys, lambda x, y: case.exact_u(0.4, x, y), "displacement")[sys.u_free]
    p = interpolate(sys, lambda x, y: case.exact_p(0.4, x, y), "pressure")[sys.p_free]
    np.testing.assert_allclose(st.u, u, atol=1e-11)
    np.testing.assert_allclose(st.p, p, atol=1e-11)


def test_elliptic_projection_compatible_for_sine():
    case, _, ops, loads = _sine()
    st = elliptic_projection(ops, case, 0.0, functionals=loads.functionals)
    assert compatibility_residual(ops, st, loads.f(0.0)) <= 1e-10


@pytest.mark.parametrize("k,level", [(1, 1), (1, 2), (2, 1), (3, 1)])
def test_infsup_matches_dense(k, level):
    _, ops = make_ops(level=level, k=k)
    beta = infsup_constant(ops)
    assert abs(beta.beta_h - dense_infsup_constant(ops)) < 1e-8
    assert beta.k == k and beta.level == level
    assert 0.3 < beta.beta_h < 1.0


def test_schur_integrator_matches_coupled_integration():
    case, _, ops, loads = _sine(level=2)
    tab = lobatto_tableau(3)
    grid = TimeGrid(0.1, 10)
    x0 = elliptic_projection(ops, case, 0.0, functionals=loads.functionals)
    traj = integrate(ops, tab, grid, x0, loads.rhs, keep_stages=False)
    p_full = np.array([st.p for st in traj.states])
    p_schur = schur_pressure_check(ops, loads, x0.p, tab, grid)
    scale = np.abs(p_full).max()
    assert np.abs(p_full - p_schur).max() <= 1e-8 * scale
