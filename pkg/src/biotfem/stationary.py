"""Static solves: consistent initial values, elliptic projection, inf-sup constant.

Also hosts the pressure-only (Schur complement) integrator used to
cross-check the full coupled time stepping on small meshes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .assemble import BlockOperators, Functionals, fixed_values
from .solver import factor, min_generalized_eig


@dataclass
class State:
    """Free-DOF coefficient vectors at time ``t``."""

    u: np.ndarray
    p: np.ndarray
    t: float = 0.0

    def vector(self) -> np.ndarray:
        return np.concatenate([self.u, self.p])

    @classmethod
    def from_vector(cls, x, n_u: int, t: float) -> "State":
        return cls(x[:n_u].copy(), x[n_u:].copy(), t)


@dataclass(frozen=True)
class InfSupResult:
    beta_h: float
    level: int
    k: int


def _norm_ratio(r, ref) -> float:
    return float(np.linalg.norm(r) / max(1.0, np.linalg.norm(ref)))


def compatibility_residual(ops: BlockOperators, state: State, f_vec) -> float:
    """``||A u - B^T p - f|| / max(1, ||f||)``."""
    r = ops.A @ state.u - ops.B.T @ state.p - f_vec
    return _norm_ratio(r, f_vec)


def solve_initial_given_p0(ops: BlockOperators, f0, p0, fact_A=None) -> State:
    """Choose ``p0`` and solve ``A u0 = f(0) + B^T p0``."""
    fact_A = fact_A or factor(ops.A, role="spd")
    p0 = np.asarray(p0, dtype=float)
    u0 = fact_A.solve(f0 + ops.B.T @ p0)
    return State(u0, p0.copy(), 0.0)


def solve_initial_given_phi0(ops: BlockOperators, f0, phi0, fact_saddle=None) -> State:
    """Choose ``phi0`` and solve ``[[A, -B^T], [B, 0]] (u0, p0) = (f(0), phi0)``."""
    fact_saddle = fact_saddle or factor(ops.saddle(), role="saddle")
    x = fact_saddle.solve(np.concatenate([f0, phi0]))
    return State.from_vector(x, ops.n_u, 0.0)


def elliptic_projection(ops: BlockOperators, case, t: float,
                        functionals: Functionals | None = None, fact_A=None,
                        fact_K=None) -> State:
    """Stationary projection of the exact fields at time ``t``.

    Solves ``K p~ = k(p, .)`` and ``A u~ = a(u, .) + B^T p~ - b(., p)`` on the
    free DOFs, with prescribed values taken from ``case.dirichlet``.
    """
    sys = ops.system
    mat = ops.material
    fq = functionals or Functionals(sys)
    x, y = fq.x, fq.y
    grad_u = np.asarray(case.exact_grad_u(t, x, y), dtype=float)
    grad_p = np.broadcast_to(case.exact_grad_p(t, x, y), (2,) + x.shape)
    p_vals = np.broadcast_to(case.exact_p(t, x, y), x.shape)

    uc, _, pc, _ = fixed_values(sys, case.dirichlet, t)
    kload = fq.k_form(grad_p, mat)[sys.p_free] - ops.K_fc @ pc
    fact_K = fact_K or factor(ops.K, role="spd")
    p_free = fact_K.solve(kload)
    p_full = sys.expand("pressure", p_free, pc)

    aload = (
        fq.a_form(grad_u, mat)[sys.u_free]
        - ops.A_fc @ uc
        + (ops.full.B.T @ p_full)[sys.u_free]
        - fq.b_form_pressure(p_vals, mat)[sys.u_free]
    )
    fact_A = fact_A or factor(ops.A, role="spd")
    return State(fact_A.solve(aload), p_free, t)


def schur_operator(ops: BlockOperators, fact_A=None) -> spla.LinearOperator:
    """``B A^{-1} B^T`` applied through a factorization of ``A``."""
    fact_A = fact_A or factor(ops.A, role="spd")
    B = ops.B
    n = ops.n_p
    return spla.LinearOperator((n, n), matvec=lambda q: B @ fact_A.solve(B.T @ q),
                               dtype=float)


def infsup_constant(ops: BlockOperators, tol: float = 1e-10) -> InfSupResult:
    """``beta_h = sqrt(lambda_min(B A^{-1} B^T, M))``.

    The displacement norm is the energy norm of ``a``, the pressure norm is L2.
    ``(B A^{-1} B^T)^{-1}`` is applied through the saddle-point factorization.
    """
    S = schur_operator(ops)
    fsad = factor(ops.saddle(), role="saddle")
    n_u = ops.n_u

    def solve_S(y):
        x = fsad.solve(np.concatenate([np.zeros(n_u), y]))
        return x[n_u:]

    lam, _ = min_generalized_eig(S, ops.M, solve_S=solve_S, tol=tol)
    sys = ops.system
    return InfSupResult(float(np.sqrt(lam)), sys.mesh.level, sys.k)


def dense_infsup_constant(ops: BlockOperators) -> float:
    """Dense-eigensolver reference for :func:`infsup_constant` (small meshes only)."""
    A = ops.A.toarray()
    B = ops.B.toarray()
    S = B @ sla.solve(A, B.T, assume_a="pos")
    lam = sla.eigh(0.5 * (S + S.T), ops.M.toarray(), eigvals_only=True)
    return float(np.sqrt(lam[0]))


def schur_pressure_check(ops: BlockOperators, loads, p0, tableau, grid) -> np.ndarray:
    """Integrate ``C p' + K p = g - B A^{-1} f'`` with ``C = B A^{-1} B^T``.

    Uses the same Lobatto-IIIA tableau as the coupled integrator.  ``C`` is
    formed column by column from triangular solves with the factor of ``A``,
    so this path is meant for small meshes.  Returns pressures at all grid
    nodes, shape ``(N + 1, n_p)``.
    """
    fact_A = factor(ops.A, role="spd")
    AiBt = fact_A.solve(ops.B.T.toarray())
    C = ops.B @ AiBt
    C = 0.5 * (C + C.T)
    K = ops.K.toarray()
    a, c, s = tableau.a, tableau.c, tableau.s
    tau = grid.tau
    n = ops.n_p

    def rhs(t):
        fdot, g = loads.rhs(t)
        return g - ops.B @ fact_A.solve(fdot)

    lu_C = sla.lu_factor(C)
    sub = a[1:, 1:]
    stage = np.kron(np.eye(s - 1), C) + tau * np.kron(sub, K)
    lu_stage = sla.lu_factor(stage)

    p = np.asarray(p0, dtype=float).copy()
    out = [p.copy()]
    for nstep in range(grid.N):
        t0 = grid.times[nstep]
        k1 = sla.lu_solve(lu_C, rhs(t0) - K @ p)
        r = np.concatenate(
            [rhs(t0 + c[i] * tau) - K @ p - tau * a[i, 0] * (K @ k1) for i in range(1, s)]
        )
        ks = sla.lu_solve(lu_stage, r).reshape(s - 1, n)
        kk = np.vstack([k1, ks])
        p = p + tau * (tableau.b @ kk)
        out.append(p.copy())
    return np.array(out)

