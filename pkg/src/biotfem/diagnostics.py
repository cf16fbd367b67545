"""Discrete energy balance, error norms against exact solutions, convergence rates.

The energy balance of the Lobatto-IIIA scheme reads, with the stage
polynomial ``U_I`` (degree ``s - 1`` interpolation of the stage values) and
``Pi0`` the L2 projection onto polynomials of degree ``s - 2`` on each step::

    1/2 a(U^n, U^n) + sum_m int k(Pi0 P, Pi0 P)
        = 1/2 a(U^0, U^0) + sum_m int <f, U_I'> + <Pi0 g, P>

All time integrals are evaluated with the ``s``-point Lobatto rule from the
stage records; the integrands are polynomials of degree at most ``2s - 3``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre

from . import kernels
from .assemble import ElementData, fixed_values, quadrature_degrees


# --------------------------------------------------------------------------
# energy identity


@dataclass
class EnergyReport:
    """Both sides of the energy balance at every grid node."""

    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    energy: np.ndarray  # 1/2 a(U^n, U^n)

    @property
    def residual(self) -> np.ndarray:
        return np.abs(self.lhs - self.rhs) / np.maximum(1.0, np.abs(self.rhs))

    @property
    def max_residual(self) -> float:
        return float(self.residual.max()) if self.residual.size else 0.0

    def first_violation(self, tol: float):
        """Index of the first node whose residual exceeds ``tol``, else ``None``."""
        bad = np.flatnonzero(self.residual > tol)
        return int(bad[0]) if bad.size else None


def _lagrange_derivative_matrix(c: np.ndarray) -> np.ndarray:
    """``D[i, j] = l_j'(c_i)`` for the Lagrange basis on nodes ``c``."""
    s = c.size
    V = np.vander(c, s, increasing=True)
    dV = np.zeros_like(V)
    for m in range(1, s):
        dV[:, m] = m * c ** (m - 1)
    return dV @ np.linalg.inv(V)


def _legendre_on_unit(c: np.ndarray, n: int) -> np.ndarray:
    """Orthonormal shifted Legendre polynomials ``phi_m(c_i)``, shape ``(n, s)``."""
    out = np.empty((n, c.size))
    for m in range(n):
        e = np.zeros(m + 1)
        e[m] = 1.0
        out[m] = math.sqrt(2 * m + 1) * legendre.legval(2 * c - 1, e)
    return out


class EnergyAccumulator:
    """Streaming version of :func:`energy_residual`; feed one stage record per step.

    ``data`` provides ``f(t)`` and ``g(t)`` on the free DOFs (for example a
    :class:`~biotfem.assemble.LoadAssembler`); ``None`` means homogeneous data.
    """

    def __init__(self, ops, data, tableau, initial=None):
        self.ops = ops
        self.data = data
        self.tableau = tableau
        self.n_u = ops.n_u
        self.D = _lagrange_derivative_matrix(tableau.c)
        self.Phi = _legendre_on_unit(tableau.c, tableau.s - 1)
        self._times, self._lhs, self._rhs, self._energy = [], [], [], []
        self._diss = 0.0
        self._work = 0.0
        self._e0 = None
        if initial is not None:
            self._start(initial.u, initial.t)

    def _half_a(self, u) -> float:
        return 0.5 * float(u @ (self.ops.A @ u))

    def _start(self, u0, t0):
        self._e0 = self._half_a(u0)
        self._times.append(t0)
        self._lhs.append(self._e0)
        self._rhs.append(self._e0)
        self._energy.append(self._e0)

    def update(self, rec) -> None:
        X = rec.values
        if self._e0 is None:
            self._start(X[0, : self.n_u], rec.t0)
        b, tau = self.tableau.b, rec.tau
        Xu, Xp = X[:, : self.n_u], X[:, self.n_u:]
        # Pi0 coefficients of the pressure on this step
        cp = (self.Phi * b) @ Xp
        K = self.ops.K
        self._diss += tau * sum(float(c @ (K @ c)) for c in cp)
        if self.data is not None:
            Udot = (self.D @ Xu) / tau
            f = np.array([self.data.f(t) for t in rec.times])
            g = np.array([self.data.g(t) for t in rec.times])
            gp = (self.Phi * b) @ g
            self._work += tau * float(b @ np.einsum("ij,ij->i", f, Udot))
            self._work += tau * float(np.sum(gp * cp))
        e = self._half_a(Xu[-1])
        self._times.append(rec.t0 + tau)
        self._energy.append(e)
        self._lhs.append(e + self._diss)
        self._rhs.append(self._e0 + self._work)

    def report(self) -> EnergyReport:
        return EnergyReport(np.array(self._times), np.array(self._lhs),
                            np.array(self._rhs), np.array(self._energy))


def energy_residual(traj, ops, data, tableau) -> EnergyReport:
    """Energy balance of a stored trajectory at every grid node.

    Raises
    ------
    ValueError
        If the trajectory carries no stage records.
    """
    if not traj.stage_records:
        raise ValueError("trajectory has no stage records; integrate with keep_stages=True")
    acc = EnergyAccumulator(ops, data, tableau, traj.states[0] if traj.states else None)
    for rec in traj.stage_records:
        acc.update(rec)
    return acc.report()


# --------------------------------------------------------------------------
# error norms


@dataclass
class ErrorReport:
    e_u_inf_H1: float
    e_p_inf_L2: float
    e_p_l2_H1: float
    dofs_u: int
    dofs_p: int
    runtime: float | None = None


class ErrorAccumulator:
    """Relative discrete-in-time errors, accumulated one grid node at a time.

    Spatial norms are computed by quadrature with the exact fields sampled at
    the quadrature points.  ``H1`` is the full norm.  The ``l2(H1)`` sum runs
    over ``n = 1..N`` with weight ``tau``; the maxima include ``n = 0``.
    """

    def __init__(self, sys, case, qdeg: int | None = None):
        qdeg = quadrature_degrees(sys.k)["rhs"] if qdeg is None else qdeg
        self.system = sys
        self.case = case
        self.eu = ElementData(sys.uspace, qdeg)
        self.ep = ElementData(sys.pspace, qdeg)
        self._max = {"u": [0.0, 0.0], "p": [0.0, 0.0]}
        self._sum = [0.0, 0.0]
        self._last_t = None

    def _fields(self, state):
        sys, t = self.system, state.t
        uc, _, pc, _ = fixed_values(sys, self.case.dirichlet, t)
        return sys.expand("displacement", state.u, uc), sys.expand("pressure", state.p, pc)

    def node_errors(self, state):
        """Absolute and exact norms ``(eu_H1, u_H1, ep_L2, p_L2, ep_H1, p_H1)``."""
        sys, case, t = self.system, self.case, state.t
        u_full, p_full = self._fields(state)
        eu, ep = self.eu, self.ep
        x, y = eu.x, eu.y
        n = sys.uspace.n_dofs
        dm = sys.uspace.dofmap

        u_ex = np.broadcast_to(case.exact_u(t, x, y), (2,) + x.shape)
        gu_ex = np.broadcast_to(case.exact_grad_u(t, x, y), (2, 2) + x.shape)
        e2u = 0.0
        n2u = 0.0
        for c in range(2):
            coef = np.ascontiguousarray(u_full[c * n + dm])
            val = kernels.values_at_quad(coef, eu.phi)
            grd = kernels.gradients_at_quad(coef, eu.G)
            e2u += np.sum(eu.w * ((u_ex[c] - val) ** 2 + (gu_ex[c, 0] - grd[..., 0]) ** 2
                                  + (gu_ex[c, 1] - grd[..., 1]) ** 2))
            n2u += np.sum(eu.w * (u_ex[c] ** 2 + gu_ex[c, 0] ** 2 + gu_ex[c, 1] ** 2))

        p_ex = np.broadcast_to(case.exact_p(t, x, y), x.shape)
        gp_ex = np.broadcast_to(case.exact_grad_p(t, x, y), (2,) + x.shape)
        coef = np.ascontiguousarray(p_full[sys.pspace.dofmap])
        val = kernels.values_at_quad(coef, ep.phi)
        grd = kernels.gradients_at_quad(coef, ep.G)
        e2p = np.sum(ep.w * (p_ex - val) ** 2)
        n2p = np.sum(ep.w * p_ex**2)
        e2g = np.sum(ep.w * ((gp_ex[0] - grd[..., 0]) ** 2 + (gp_ex[1] - grd[..., 1]) ** 2))
        n2g = np.sum(ep.w * (gp_ex[0] ** 2 + gp_ex[1] ** 2))
        return tuple(math.sqrt(max(v, 0.0)) for v in
                     (e2u, n2u, e2p, n2p, e2p + e2g, n2p + n2g))

    def add(self, state) -> None:
        eu, nu, ep, np_, eh, nh = self.node_errors(state)
        self._max["u"][0] = max(self._max["u"][0], eu)
        self._max["u"][1] = max(self._max["u"][1], nu)
        self._max["p"][0] = max(self._max["p"][0], ep)
        self._max["p"][1] = max(self._max["p"][1], np_)
        if self._last_t is not None:
            tau = state.t - self._last_t
            self._sum[0] += tau * eh**2
            self._sum[1] += tau * nh**2
        self._last_t = state.t

    @staticmethod
    def _rel(err, ref):
        return err / ref if ref > 0 else err

    def report(self, runtime: float | None = None) -> ErrorReport:
        sys = self.system
        return ErrorReport(
            e_u_inf_H1=self._rel(*self._max["u"]),
            e_p_inf_L2=self._rel(*self._max["p"]),
            e_p_l2_H1=self._rel(math.sqrt(self._sum[0]), math.sqrt(self._sum[1])),
            dofs_u=sys.n_u_free,
            dofs_p=sys.n_p_free,
            runtime=runtime,
        )


def error_norms(traj, sys, case, runtime: float | None = None) -> ErrorReport:
    """Relative errors of a stored trajectory against ``case``'s exact fields."""
    acc = ErrorAccumulator(sys, case)
    for st in traj.states:
        acc.add(st)
    return acc.report(runtime)


def eoc(errors, hs) -> list:
    """Experimental orders ``log(e_{i-1}/e_i) / log(h_{i-1}/h_i)``.

    Raises
    ------
    ValueError
        On length mismatch, fewer than two entries, or nonpositive values.
    """
    e = np.asarray(errors, dtype=float)
    h = np.asarray(hs, dtype=float)
    if e.shape != h.shape or e.ndim != 1 or e.size < 2:
        raise ValueError("errors and hs must be 1D sequences of equal length >= 2")
    if np.any(e <= 0) or np.any(h <= 0) or not np.all(np.isfinite(e)):
        raise ValueError("errors and mesh sizes must be positive and finite")
    return list(np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:]))
