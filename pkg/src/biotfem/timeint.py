"""Lobatto-IIIA integration of the differentiated Biot system.

With ``x = (u, p)`` the semi-discrete problem after differentiating the
equilibrium equation is the implicit ODE::

    [[A, -B^T], [B, 0]] x' + [[0, 0], [0, K]] x = (f', g)

An ``s``-stage Lobatto-IIIA step computes stage derivatives ``K_i`` from
``M K_i + N (x_n + tau sum_j a_ij K_j) = r(t_n + c_i tau)``.  Since the first
row of ``a`` vanishes, ``K_1`` follows from one saddle solve and the
remaining ``s - 1`` stages form one coupled block system, factored once per
step size (directly, or decoupled through the eigenvectors of ``a[1:, 1:]``).
The method is stiffly accurate: ``x_{n+1}`` is the last stage.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from numpy.polynomial import legendre

from .element import lobatto_points
from .solver import factor
from .stationary import State, compatibility_residual

COMPATIBILITY_WARN = 1e-8


@dataclass(frozen=True)
class ButcherTableau:
    s: int
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


@lru_cache(maxsize=None)
def lobatto_tableau(s: int) -> ButcherTableau:
    """Lobatto-IIIA coefficients ``a_ij = int_0^{c_i} l_j``, ``b_j = int_0^1 l_j``."""
    lob = lobatto_points(s)
    c = lob.nodes
    xg, wg = legendre.leggauss(s + 1)
    a = np.zeros((s, s))
    for i in range(1, s):
        t = c[i] * (xg + 1) / 2
        w = c[i] * wg / 2
        for j in range(s):
            others = [m for m in range(s) if m != j]
            lj = np.prod([(t - c[m]) / (c[j] - c[m]) for m in others], axis=0)
            a[i, j] = w @ lj
    b = lob.weights.copy()
    a[-1] = b
    return ButcherTableau(s, a, b, c.copy())


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of ``[0, T]`` into ``N`` steps."""

    T: float
    N: int

    def __post_init__(self):
        if self.N < 1 or not self.T > 0:
            raise ValueError(f"invalid time grid T={self.T}, N={self.N}")

    @property
    def tau(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.N + 1) * self.tau

    @classmethod
    def from_step(cls, T: float, tau: float) -> "TimeGrid":
        """Grid with ``N = round(T / tau)``; the actual step is ``T / N``."""
        return cls(T, max(1, int(round(T / tau))))


@dataclass
class StageRecord:
    """Stage data of one step: times, derivatives ``K_i`` and values ``X_i``."""

    t0: float
    tau: float
    times: np.ndarray
    derivatives: np.ndarray
    values: np.ndarray


@dataclass
class Trajectory:
    states: list = field(default_factory=list)
    stage_records: list = field(default_factory=list)
    tableau: ButcherTableau | None = None
    grid: TimeGrid | None = None


class LobattoStepper:
    """Factorizations for one (operators, tableau, step size) triple.

    ``stage_solver="decoupled"`` (the default) diagonalizes the lower-right
    block ``a[1:, 1:] = V diag(lam) V^{-1}`` and solves the independent systems
    ``(M + tau lam_j N) z_j = (V^{-1} R)_j``; one complex factorization serves each
    conjugate eigenvalue pair.  ``"coupled"`` factors the full
    ``(s - 1)``-block stage matrix instead.
    """

    def __init__(self, ops, tableau: ButcherTableau, tau: float,
                 stage_solver: str = "decoupled"):
        if not tau > 0:
            raise ValueError(f"step size must be positive, got {tau}")
        if stage_solver not in ("decoupled", "coupled"):
            raise ValueError(f"unknown stage solver {stage_solver!r}")
        self.ops = ops
        self.tableau = tableau
        self.tau = tau
        self.stage_solver = stage_solver
        self.n_u = ops.n_u
        self.M = ops.saddle().tocsr()
        self.N = ops.dissipation().tocsr()
        s = tableau.s
        self.fact_M = factor(self.M, role="saddle")
        sub = tableau.a[1:, 1:]
        if stage_solver == "coupled":
            stage = sp.kron(sp.identity(s - 1), self.M) + tau * sp.kron(sp.csr_matrix(sub), self.N)
            self.fact_stage = factor(stage.tocsc(), role="stage_block")
            return
        lam, V = np.linalg.eig(sub)
        self._V = V
        self._Vinv = np.linalg.inv(V)
        # representative index per eigenvalue; conjugate partners reuse it
        self._rep = []
        self._facts = {}
        for j, lj in enumerate(lam):
            partner = next((i for i in self._facts
                            if abs(lj.imag) > 0 and abs(lam[i] - np.conj(lj)) < 1e-12), None)
            if partner is not None:
                self._rep.append((partner, True))
                continue
            mat = self.M + (tau * lj.real) * self.N if abs(lj.imag) == 0 else \
                self.M.astype(complex) + (tau * lj) * self.N
            self._facts[j] = factor(mat.tocsc(), role="stage")
            self._rep.append((j, False))

    def _solve_stages(self, R: np.ndarray) -> np.ndarray:
        """Stage derivatives ``K_2..K_s`` from the block right-hand side ``R``."""
        if self.stage_solver == "coupled":
            return self.fact_stage.solve(R.ravel()).reshape(R.shape)
        Rt = self._Vinv @ R
        Z = np.empty(Rt.shape, dtype=complex)
        done = {}
        for j, (rep, conj) in enumerate(self._rep):
            if conj:
                Z[j] = np.conj(done[rep])
                continue
            z = self._facts[j].solve(Rt[j])
            Z[j] = z
            done[j] = z
        return np.real(self._V @ Z)

    def step(self, x: np.ndarray, t: float, rhs) -> StageRecord:
        """One step from ``x`` at time ``t``; ``rhs(t)`` returns ``(f', g)``."""
        tab, tau = self.tableau, self.tau
        s, a, c = tab.s, tab.a, tab.c
        n = x.size
        times = t + c * tau
        r = [np.concatenate(rhs(ti)) for ti in times]
        Nx = self.N @ x
        Kst = np.empty((s, n))
        Kst[0] = self.fact_M.solve(r[0] - Nx)
        NK1 = self.N @ Kst[0]
        R = np.array([r[i] - Nx - tau * a[i, 0] * NK1 for i in range(1, s)])
        Kst[1:] = self._solve_stages(R)
        X = x[None, :] + tau * (a @ Kst)
        return StageRecord(t, tau, times, Kst, X)

    @staticmethod
    def advance(x: np.ndarray, rec: StageRecord, tableau: ButcherTableau) -> np.ndarray:
        return x + rec.tau * (tableau.b @ rec.derivatives)


def step(ops, tableau: ButcherTableau, state: State, tau: float, rhs,
         stepper: LobattoStepper | None = None) -> State:
    stepper = stepper or LobattoStepper(ops, tableau, tau)
    x = state.vector()
    rec = stepper.step(x, state.t, rhs)
    return State.from_vector(stepper.advance(x, rec, tableau), ops.n_u, state.t + tau)


def integrate(ops, tableau: ButcherTableau, grid: TimeGrid, initial: State, rhs,
              f_vec=None, callback=None, keep_states: bool = True,
              keep_stages: bool = True) -> Trajectory:
    """Integrate from ``initial`` over ``grid``.

    ``rhs(t)`` returns ``(f'(t), g(t))`` on the free DOFs.  If ``f_vec`` is
    given the initial compatibility residual is checked and a warning is
    issued above ``1e-8``.  ``callback(n, state, record)`` is invoked after
    every step, which allows streaming diagnostics without storing the
    trajectory.
    """
    if f_vec is not None:
        res = compatibility_residual(ops, initial, f_vec(initial.t))
        if res > COMPATIBILITY_WARN:
            warnings.warn(f"initial state violates compatibility (residual {res:.2e})",
                          stacklevel=2)
    stepper = LobattoStepper(ops, tableau, grid.tau)
    traj = Trajectory(tableau=tableau, grid=grid)
    if keep_states:
        traj.states.append(initial)
    x = initial.vector()
    times = grid.times
    for n in range(grid.N):
        rec = stepper.step(x, times[n], rhs)
        x = stepper.advance(x, rec, tableau)
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"non-finite solution at step {n + 1}")
        state = State.from_vector(x, ops.n_u, times[n + 1])
        if keep_states:
            traj.states.append(state)
        if keep_stages:
            traj.stage_records.append(rec)
        if callback is not None:
            callback(n + 1, state, rec)
    return traj


def order_condition_defect(tableau: ButcherTableau) -> float:
    """Largest violation of ``sum_j a_ij c_j^(m-1) = c_i^m / m``, ``m < s``."""
    a, c = tableau.a, tableau.c
    worst = 0.0
    for m in range(1, tableau.s):
        lhs = a @ c ** (m - 1)
        worst = max(worst, float(np.max(np.abs(lhs - c**m / m))))
    return worst

