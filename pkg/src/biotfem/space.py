"""Continuous Lagrange spaces and the Taylor-Hood pair on a unit-square mesh.

Global DOFs are identified by integer lattice keys: a degree-``m`` node of a
level-``L`` mesh has integer coordinates in units of ``1/(m * 2**L)``, so two
elements agree on a shared node without any floating-point matching.

Displacement DOFs are blocked by component: index ``c * n_nodes + node``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .element import reference_element
from .mesh import SIDES, Mesh

FULL_DIRICHLET = "full_dirichlet"
TANGENTIAL_DIRICHLET = "tangential_dirichlet"


@dataclass(frozen=True)
class BcSpec:
    """Essential boundary conditions.

    ``pressure_dirichlet`` is the set of sides on which ``p`` is prescribed.
    With ``tangential_dirichlet`` the displacement component parallel to
    each side is prescribed there (``u_y`` on ``x = 0, 1``; ``u_x`` on
    ``y = 0, 1``) and the normal component is left free.
    """

    pressure_dirichlet: frozenset = frozenset(SIDES)
    displacement_mode: str = FULL_DIRICHLET

    def __post_init__(self):
        object.__setattr__(self, "pressure_dirichlet", frozenset(self.pressure_dirichlet))
        unknown = self.pressure_dirichlet - set(SIDES)
        if unknown:
            raise ValueError(f"unknown side tags {sorted(unknown)}")
        if self.displacement_mode not in (FULL_DIRICHLET, TANGENTIAL_DIRICHLET):
            raise ValueError(f"unknown displacement mode {self.displacement_mode!r}")


class ScalarSpace:
    """Scalar continuous ``P_m`` space.

    Attributes
    ----------
    dofmap : ndarray, shape (nt, nb)
        Global node index of each local basis function.
    coords : ndarray, shape (n, 2)
        Node coordinates.
    ikeys : ndarray, shape (n, 2)
        Integer node coordinates in units of ``1/(m * 2**level)``.
    """

    def __init__(self, mesh: Mesh, degree: int):
        self.mesh = mesh
        self.degree = degree
        self.element = reference_element(degree)
        abc = self.element._abc  # (nb, 3) barycentric multi-indices
        V = mesh.ivertices[mesh.triangles]  # (nt, 3, 2)
        keys = np.einsum("bv,tvd->tbd", abc, V)  # integer, units 1/(m 2^L)
        self.scale = degree * mesh.resolution
        flat = keys[..., 0] * (self.scale + 1) + keys[..., 1]
        uniq, inverse = np.unique(flat.ravel(), return_inverse=True)
        self.dofmap = inverse.reshape(flat.shape)
        self.ikeys = np.stack([uniq // (self.scale + 1), uniq % (self.scale + 1)], axis=1)
        self.coords = self.ikeys / float(self.scale)

    @property
    def n_dofs(self) -> int:
        return self.ikeys.shape[0]

    def side_nodes(self, side: str) -> np.ndarray:
        axis, value = {
            "left": (0, 0),
            "right": (0, self.scale),
            "bottom": (1, 0),
            "top": (1, self.scale),
        }[side]
        return np.flatnonzero(self.ikeys[:, axis] == value)


@dataclass(eq=False)
class FeSystem:
    """Taylor-Hood pair: vector ``P_{k+1}`` displacement, scalar ``P_k`` pressure."""

    mesh: Mesh
    k: int
    bc: BcSpec
    uspace: ScalarSpace = field(repr=False)
    pspace: ScalarSpace = field(repr=False)
    u_free: np.ndarray = field(repr=False)
    u_fixed: np.ndarray = field(repr=False)
    p_free: np.ndarray = field(repr=False)
    p_fixed: np.ndarray = field(repr=False)

    @property
    def n_u(self) -> int:
        """Total number of displacement DOFs."""
        return 2 * self.uspace.n_dofs

    @property
    def n_p(self) -> int:
        return self.pspace.n_dofs

    @property
    def n_u_free(self) -> int:
        return len(self.u_free)

    @property
    def n_p_free(self) -> int:
        return len(self.p_free)

    @property
    def u_dofmap(self) -> np.ndarray:
        """Element-to-global displacement map, shape (nt, 2*nb), x block first."""
        n = self.uspace.n_dofs
        d = self.uspace.dofmap
        return np.hstack([d, d + n])

    def expand(self, which: str, free_values, fixed_values=None) -> np.ndarray:
        """Full coefficient vector from free values (and prescribed values)."""
        if which == "displacement":
            full = np.zeros(self.n_u)
            free, fixed = self.u_free, self.u_fixed
        else:
            full = np.zeros(self.n_p)
            free, fixed = self.p_free, self.p_fixed
        full[free] = free_values
        if fixed_values is not None:
            full[fixed] = fixed_values
        return full


def build_system(mesh: Mesh, k: int, bc: BcSpec | None = None) -> FeSystem:
    if not 1 <= k <= 3:
        raise ValueError(f"pressure degree k must be in 1..3, got {k}")
    bc = bc or BcSpec()
    uspace = ScalarSpace(mesh, k + 1)
    pspace = ScalarSpace(mesh, k)

    p_fixed = np.unique(
        np.concatenate([pspace.side_nodes(s) for s in sorted(bc.pressure_dirichlet)] + [[]])
    ).astype(np.int64)

    n = uspace.n_dofs
    if bc.displacement_mode == FULL_DIRICHLET:
        nodes = np.unique(np.concatenate([uspace.side_nodes(s) for s in SIDES]))
        u_fixed = np.concatenate([nodes, nodes + n])
    else:
        # component parallel to the side: y on left/right, x on bottom/top
        ynodes = np.union1d(uspace.side_nodes("left"), uspace.side_nodes("right"))
        xnodes = np.union1d(uspace.side_nodes("bottom"), uspace.side_nodes("top"))
        u_fixed = np.concatenate([xnodes, ynodes + n])
    u_fixed = np.unique(u_fixed).astype(np.int64)

    return FeSystem(
        mesh=mesh,
        k=k,
        bc=bc,
        uspace=uspace,
        pspace=pspace,
        u_free=np.setdiff1d(np.arange(2 * n), u_fixed),
        u_fixed=u_fixed,
        p_free=np.setdiff1d(np.arange(pspace.n_dofs), p_fixed),
        p_fixed=p_fixed,
    )


def interpolate(sys: FeSystem, field, which: str) -> np.ndarray:
    """Nodal interpolant over all DOFs (free and constrained).

    ``field(x, y)`` is vectorized; for ``which='displacement'`` it returns
    an array of shape ``(2, n)``.
    """
    if which == "displacement":
        x, y = sys.uspace.coords.T
        vals = np.asarray(field(x, y), dtype=float)
        return np.broadcast_to(vals, (2, len(x))).reshape(-1).copy()
    if which == "pressure":
        x, y = sys.pspace.coords.T
        return np.broadcast_to(np.asarray(field(x, y), dtype=float), x.shape).copy()
    raise ValueError(f"which must be 'displacement' or 'pressure', got {which!r}")
