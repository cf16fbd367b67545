"""Sparse assembly of the Biot bilinear forms and load vectors.

Forms, with ``A``, ``K``, ``M`` symmetric and ``B`` stored pressure-by-displacement::

    a(u, v) = int 2 mu eps(u):eps(v) + lam div(u) div(v)
    b(v, q) = int alpha q div(v)
    k(p, q) = int kappa grad(p) . grad(q)
    m(p, q) = int p q

The semi-discrete system reads ``A u - B^T p = f``, ``B u' + K p = g`` on the
free DOFs; prescribed values enter through the load vectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import kernels
from .element import triangle_quadrature
from .space import FeSystem, ScalarSpace


@dataclass(frozen=True)
class MaterialParameters:
    mu: float = 1.0
    lam: float = 1.0
    kappa: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if not (self.mu > 0 and self.lam >= 0 and self.kappa > 0 and self.alpha > 0):
            raise ValueError(f"invalid material parameters {self}")


def quadrature_degrees(k: int) -> dict:
    """Quadrature exactness used for each form with pressure degree ``k``."""
    return {
        "a": 2 * (k + 1),
        "b": (k + 1) + k,
        "k": 2 * k,
        "m": 2 * k,
        "rhs": max(2 * k + 2, 8),
    }


class ElementData:
    """Basis values and physical gradients at the quadrature points of every element."""

    def __init__(self, space: ScalarSpace, qdeg: int):
        mesh = space.mesh
        rule = triangle_quadrature(qdeg)
        P = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
        J = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]], axis=2)  # columns
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        invJT = np.empty_like(J)
        invJT[:, 0, 0] = J[:, 1, 1] / det
        invJT[:, 0, 1] = -J[:, 1, 0] / det
        invJT[:, 1, 0] = -J[:, 0, 1] / det
        invJT[:, 1, 1] = J[:, 0, 0] / det
        el = space.element
        self.space = space
        self.rule = rule
        self.phi = np.ascontiguousarray(el.eval(rule.points))  # (nq, nb)
        dphi = el.grad(rule.points)  # (nq, nb, 2)
        self.G = np.ascontiguousarray(np.einsum("eij,qbj->eqbi", invJT, dphi))
        self.w = np.ascontiguousarray(np.abs(det)[:, None] * rule.weights[None, :])
        self.xq = P[:, 0][:, None, :] + np.einsum("eij,qj->eqi", J, rule.points)
        self.det = det

    @property
    def x(self):
        return self.xq[..., 0]

    @property
    def y(self):
        return self.xq[..., 1]


def _csr_from_local(local, rows, cols, shape) -> sp.csr_matrix:
    """Sum element matrices into CSR in a fixed, element-major order.

    Duplicate entries are accumulated in element order, so mirrored entries
    of symmetric element matrices produce bitwise-equal global entries.
    """
    r = np.broadcast_to(rows[:, :, None], local.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], local.shape).ravel()
    v = local.ravel()
    order = np.lexsort((c, r))  # stable: element order kept among duplicates
    r, c, v = r[order], c[order], v[order]
    key = r.astype(np.int64) * shape[1] + c
    start = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    data = np.add.reduceat(v, start)
    ur, uc = r[start], c[start]
    indptr = np.zeros(shape[0] + 1, dtype=np.int64)
    np.add.at(indptr, ur + 1, 1)
    indptr = np.cumsum(indptr)
    return sp.csr_matrix((data, uc, indptr), shape=shape)


@dataclass(frozen=True)
class FullOperators:
    """Forms assembled over all DOFs, before eliminating constraints."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    K: sp.csr_matrix
    M: sp.csr_matrix


def assemble_full_operators(sys: FeSystem, mat: MaterialParameters) -> FullOperators:
    q = quadrature_degrees(sys.k)
    eu_a = ElementData(sys.uspace, q["a"])
    eu_b = ElementData(sys.uspace, q["b"])
    ep_b = ElementData(sys.pspace, q["b"])
    ep_k = ElementData(sys.pspace, q["k"])
    udofs = sys.u_dofmap
    pdofs = sys.pspace.dofmap
    nu, np_ = sys.n_u, sys.n_p

    A = _csr_from_local(
        kernels.elasticity_local(eu_a.G, eu_a.w, mat.mu, mat.lam), udofs, udofs, (nu, nu)
    )
    B = _csr_from_local(
        kernels.coupling_local(ep_b.phi, eu_b.G, eu_b.w, mat.alpha), pdofs, udofs, (np_, nu)
    )
    K = _csr_from_local(kernels.laplace_local(ep_k.G, ep_k.w, mat.kappa), pdofs, pdofs,
                        (np_, np_))
    M = _csr_from_local(kernels.mass_local(ep_k.phi, ep_k.w), pdofs, pdofs, (np_, np_))
    return FullOperators(A, B, K, M)


@dataclass(eq=False)
class BlockOperators:
    """Operators on free DOFs plus the couplings to prescribed DOFs.

    ``A_fc``: free u rows, fixed u columns.  ``B_fc``: free p rows, fixed u
    columns.  ``B_cf``: fixed p rows, free u columns.  ``K_fc``: free p rows,
    fixed p columns.
    """

    system: FeSystem
    material: MaterialParameters
    A: sp.csr_matrix
    B: sp.csr_matrix
    K: sp.csr_matrix
    M: sp.csr_matrix
    A_fc: sp.csr_matrix = field(repr=False)
    B_fc: sp.csr_matrix = field(repr=False)
    B_cf: sp.csr_matrix = field(repr=False)
    K_fc: sp.csr_matrix = field(repr=False)
    full: FullOperators = field(repr=False)

    @property
    def n_u(self) -> int:
        return self.A.shape[0]

    @property
    def n_p(self) -> int:
        return self.K.shape[0]

    def saddle(self) -> sp.csr_matrix:
        """``[[A, -B^T], [B, 0]]``, the matrix in front of the time derivatives."""
        return sp.bmat([[self.A, -self.B.T], [self.B, None]], format="csr")

    def dissipation(self) -> sp.csr_matrix:
        """``[[0, 0], [0, K]]``."""
        return sp.block_diag(
            [sp.csr_matrix((self.n_u, self.n_u)), self.K], format="csr"
        )


def _sub(Mat, rows, cols):
    return Mat[rows][:, cols].tocsr()


def assemble_operators(sys: FeSystem, mat: MaterialParameters) -> BlockOperators:
    full = assemble_full_operators(sys, mat)
    uf, uc, pf, pc = sys.u_free, sys.u_fixed, sys.p_free, sys.p_fixed
    return BlockOperators(
        system=sys,
        material=mat,
        A=_sub(full.A, uf, uf),
        B=_sub(full.B, pf, uf),
        K=_sub(full.K, pf, pf),
        M=_sub(full.M, pf, pf),
        A_fc=_sub(full.A, uf, uc),
        B_fc=_sub(full.B, pf, uc),
        B_cf=_sub(full.B, pc, uf),
        K_fc=_sub(full.K, pf, pc),
        full=full,
    )


# --------------------------------------------------------------------------
# load functionals


@dataclass(frozen=True)
class DirichletData:
    """Prescribed fields and their time derivatives as ``callable(t, x, y)``."""

    u: Callable
    u_t: Callable
    p: Callable
    p_t: Callable


@dataclass(frozen=True)
class LoadVectors:
    f: np.ndarray
    g: np.ndarray
    fdot: np.ndarray


class Functionals:
    """Quadrature-evaluated linear functionals on the Taylor-Hood spaces.

    Fields are given by their values at the quadrature points
    (``self.x``, ``self.y``, each shape ``(nt, nq)``).  Results are full
    coefficient vectors over all DOFs.
    """

    def __init__(self, sys: FeSystem, qdeg: int | None = None):
        qdeg = quadrature_degrees(sys.k)["rhs"] if qdeg is None else qdeg
        self.system = sys
        self.eu = ElementData(sys.uspace, qdeg)
        self.ep = ElementData(sys.pspace, qdeg)
        self.x, self.y = self.eu.x, self.eu.y

    def _scatter(self, local, dofs, n):
        return np.bincount(dofs.ravel(), weights=local.ravel(), minlength=n)

    def scalar(self, values) -> np.ndarray:
        """``int f q_i`` over pressure basis functions."""
        ep = self.ep
        loc = kernels.load_local(np.ascontiguousarray(values, dtype=float), ep.phi, ep.w)
        return self._scatter(loc, self.system.pspace.dofmap, self.system.n_p)

    def vector(self, values) -> np.ndarray:
        """``int f . v_i`` over displacement basis functions; ``values`` is (2, nt, nq)."""
        eu = self.eu
        loc = np.hstack(
            [kernels.load_local(np.ascontiguousarray(values[c], dtype=float), eu.phi, eu.w)
             for c in range(2)]
        )
        return self._scatter(loc, self.system.u_dofmap, self.system.n_u)

    def a_form(self, grad_u, mat: MaterialParameters) -> np.ndarray:
        """``a(u, v_i)`` for an exact field with gradient ``grad_u[i, j] = d_j u_i``."""
        div = grad_u[0, 0] + grad_u[1, 1]
        sig = np.empty_like(grad_u)
        for i in range(2):
            for j in range(2):
                sig[i, j] = mat.mu * (grad_u[i, j] + grad_u[j, i])
            sig[i, i] = sig[i, i] + mat.lam * div
        eu = self.eu
        # v = phi_b e_a  ->  sum_d sigma_ad d_d phi_b
        loc = np.concatenate(
            [np.einsum("eq,deq,eqbd->eb", eu.w, sig[a], eu.G) for a in range(2)], axis=1
        )
        return self._scatter(loc, self.system.u_dofmap, self.system.n_u)

    def b_form_pressure(self, p_values, mat: MaterialParameters) -> np.ndarray:
        """``b(v_i, p) = int alpha p div(v_i)`` for an exact pressure."""
        eu = self.eu
        loc = np.concatenate(
            [np.einsum("eq,eq,eqb->eb", eu.w, p_values, eu.G[..., a]) for a in range(2)],
            axis=1,
        )
        return mat.alpha * self._scatter(loc, self.system.u_dofmap, self.system.n_u)

    def k_form(self, grad_p, mat: MaterialParameters) -> np.ndarray:
        """``k(p, q_i)`` for an exact pressure gradient ``grad_p`` (2, nt, nq)."""
        ep = self.ep
        loc = np.einsum("eq,deq,eqbd->eb", ep.w, grad_p, ep.G)
        return mat.kappa * self._scatter(loc, self.system.pspace.dofmap, self.system.n_p)


def fixed_values(sys: FeSystem, dirichlet: DirichletData | None, t: float):
    """Prescribed values ``(u_c, u_c', p_c, p_c')`` at the constrained DOFs."""
    if dirichlet is None:
        zu, zp = np.zeros(len(sys.u_fixed)), np.zeros(len(sys.p_fixed))
        return zu, zu.copy(), zp, zp.copy()
    n = sys.uspace.n_dofs
    node, comp = sys.u_fixed % n, sys.u_fixed // n
    xu, yu = sys.uspace.coords[node].T
    xp, yp = sys.pspace.coords[sys.p_fixed].T
    uc = np.asarray(dirichlet.u(t, xu, yu))[comp, np.arange(len(node))]
    uct = np.asarray(dirichlet.u_t(t, xu, yu))[comp, np.arange(len(node))]
    pc = np.broadcast_to(dirichlet.p(t, xp, yp), xp.shape).astype(float)
    pct = np.broadcast_to(dirichlet.p_t(t, xp, yp), xp.shape).astype(float)
    return uc, uct, pc, pct


G_QUADRATURE = "quadrature"
G_INTERPOLANT = "interpolant"
G_LOAD_MODES = (G_QUADRATURE, G_INTERPOLANT)


class LoadAssembler:
    """Time-dependent load vectors on the free DOFs, lifting included.

    ``g_load`` selects how the mass source enters: ``"quadrature"`` samples
    ``g`` at the quadrature points, ``"interpolant"`` integrates its nodal
    interpolant in the pressure space.  Both agree for ``g`` in that space.

    With prescribed values ``u_c``, ``p_c``::

        f_vec    = F_f - A_fc u_c + B_cf^T p_c
        g_vec    = G_f - B_fc u_c' - K_fc p_c
        fdot_vec = F'_f - A_fc u_c' + B_cf^T p_c'
    """

    def __init__(self, ops: BlockOperators, data_f, data_g, data_fdot=None,
                 dirichlet: DirichletData | None = None, qdeg: int | None = None,
                 g_load: str = G_QUADRATURE):
        if g_load not in G_LOAD_MODES:
            raise ValueError(f"g_load must be one of {G_LOAD_MODES}, got {g_load!r}")
        self.ops = ops
        self.system = ops.system
        self.functionals = Functionals(ops.system, qdeg)
        self.data_f, self.data_g, self.data_fdot = data_f, data_g, data_fdot
        self.dirichlet = dirichlet
        self.g_load = g_load

    def _vec(self, fun, t):
        fq = self.functionals
        vals = np.broadcast_to(np.asarray(fun(t, fq.x, fq.y), dtype=float),
                               (2,) + fq.x.shape)
        return fq.vector(vals)[self.system.u_free]

    def _scal(self, fun, t):
        fq = self.functionals
        vals = np.broadcast_to(np.asarray(fun(t, fq.x, fq.y), dtype=float), fq.x.shape)
        return fq.scalar(vals)[self.system.p_free]

    def f(self, t: float) -> np.ndarray:
        out = self._vec(self.data_f, t)
        if self.dirichlet is not None:
            uc, _, pc, _ = fixed_values(self.system, self.dirichlet, t)
            out += -self.ops.A_fc @ uc + self.ops.B_cf.T @ pc
        return out

    def fdot(self, t: float) -> np.ndarray:
        if self.data_fdot is None:
            raise ValueError("no time derivative of f supplied")
        out = self._vec(self.data_fdot, t)
        if self.dirichlet is not None:
            _, uct, _, pct = fixed_values(self.system, self.dirichlet, t)
            out += -self.ops.A_fc @ uct + self.ops.B_cf.T @ pct
        return out

    def _scal_interpolant(self, fun, t):
        fq = self.functionals
        ps = self.system.pspace
        nodal = np.broadcast_to(np.asarray(fun(t, *ps.coords.T), dtype=float), (ps.n_dofs,))
        coef = np.ascontiguousarray(nodal[ps.dofmap])
        vals = kernels.values_at_quad(coef, fq.ep.phi)
        return fq.scalar(vals)[self.system.p_free]

    def g(self, t: float) -> np.ndarray:
        if self.g_load == G_INTERPOLANT:
            out = self._scal_interpolant(self.data_g, t)
        else:
            out = self._scal(self.data_g, t)
        if self.dirichlet is not None:
            _, uct, pc, _ = fixed_values(self.system, self.dirichlet, t)
            out += -self.ops.B_fc @ uct - self.ops.K_fc @ pc
        return out

    def __call__(self, t: float) -> LoadVectors:
        fdot = self.fdot(t) if self.data_fdot is not None else None
        return LoadVectors(self.f(t), self.g(t), fdot)

    def rhs(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Right-hand side ``(f', g)`` of the differentiated system."""
        return self.fdot(t), self.g(t)


def assemble_load(ops: BlockOperators, data_f, data_g, t: float, data_fdot=None,
                  dirichlet: DirichletData | None = None,
                  g_load: str = G_QUADRATURE) -> LoadVectors:
    """Load vectors at time ``t``; see :class:`LoadAssembler`."""
    return LoadAssembler(ops, data_f, data_g, data_fdot, dirichlet, g_load=g_load)(t)
