"""Uniform triangulations of the unit square.

The coarsest mesh splits the square along the (0,0)-(1,1) diagonal into two
triangles; finer meshes are obtained by red refinement.  Besides float
coordinates every mesh keeps integer vertex coordinates in units of
``1/2**level`` so that downstream DOF numbering never compares floats.

Example
-------
>>> m = refine(refine(initial_mesh()))
>>> m.triangles.shape, m.vertices.shape
((32, 3), (25, 2))
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming triangle mesh of the unit square.

    Attributes
    ----------
    vertices : ndarray, shape (nv, 2)
        Float coordinates in ``[0, 1]**2``.
    ivertices : ndarray, shape (nv, 2)
        Integer coordinates, ``vertices == ivertices / 2**level``.
    triangles : ndarray, shape (nt, 3)
        Vertex indices, counterclockwise.
    boundary_edges : ndarray, shape (nb, 2)
        Vertex pairs of boundary edges.
    boundary_tags : tuple of str
        Side tag of each boundary edge, one of :data:`SIDES`.
    level : int
        Number of refinements applied to :func:`initial_mesh`.
    """

    vertices: np.ndarray
    ivertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_tags: tuple
    level: int

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def resolution(self) -> int:
        """Number of grid intervals per side, ``2**level``."""
        return 2**self.level

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Unique edges and the triangle-to-edge map.

        Returns
        -------
        edges : ndarray, shape (ne, 2)
            Canonical ``(min, max)`` vertex pairs, lexicographically sorted.
        tri_edges : ndarray, shape (nt, 3)
            Edge index of local edge ``i``, which is opposite local vertex ``i``.
        """
        t = self.triangles
        local = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1)
        local = np.sort(local, axis=2).reshape(-1, 2)
        edges, inverse = np.unique(local, axis=0, return_inverse=True)
        return edges, inverse.reshape(-1, 3)

    def write_text(self, path) -> None:
        """Dump vertices (``x y``) followed by triangles (``i j k``)."""
        with open(path, "w") as fh:
            fh.write(f"{self.n_vertices} {self.n_triangles}\n")
            for x, y in self.vertices:
                fh.write(f"{x:.17g} {y:.17g}\n")
            for i, j, k in self.triangles:
                fh.write(f"{i} {j} {k}\n")


def initial_mesh() -> Mesh:
    """Unit square split along the (0,0)-(1,1) diagonal."""
    iv = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.int64)
    tri = np.array([[0, 1, 2], [0, 2, 3]], dtype=np.int64)
    bedges = np.array([[0, 1], [1, 2], [2, 3], [3, 0]], dtype=np.int64)
    return Mesh(
        vertices=iv.astype(float),
        ivertices=iv,
        triangles=tri,
        boundary_edges=bedges,
        boundary_tags=("bottom", "right", "top", "left"),
        level=0,
    )


def refine(m: Mesh) -> Mesh:
    """Red refinement: each triangle is split into four via edge midpoints.

    Midpoints are numbered after the old vertices in the lexicographic order
    of their canonical edge keys, so the result depends only on the input.
    """
    nv = m.n_vertices
    edges, tri_edges = m.edges()
    iv = np.vstack([2 * m.ivertices, m.ivertices[edges[:, 0]] + m.ivertices[edges[:, 1]]])

    t = m.triangles
    mid = nv + tri_edges  # mid[:, i] lies opposite vertex i
    v0, v1, v2 = t[:, 0], t[:, 1], t[:, 2]
    m12, m20, m01 = mid[:, 0], mid[:, 1], mid[:, 2]
    children = np.stack(
        [
            np.stack([v0, m01, m20], axis=1),
            np.stack([m01, v1, m12], axis=1),
            np.stack([m20, m12, v2], axis=1),
            np.stack([m01, m12, m20], axis=1),
        ],
        axis=1,
    ).reshape(-1, 3)

    be = m.boundary_edges
    keys = edges[:, 0] * nv + edges[:, 1]
    bkeys = be.min(axis=1) * nv + be.max(axis=1)
    bmid = nv + np.searchsorted(keys, bkeys)
    new_be = np.stack(
        [np.stack([be[:, 0], bmid], axis=1), np.stack([bmid, be[:, 1]], axis=1)], axis=1
    ).reshape(-1, 2)
    new_tags = tuple(tag for tag in m.boundary_tags for _ in range(2))

    level = m.level + 1
    return Mesh(
        vertices=iv / float(2**level),
        ivertices=iv,
        triangles=children,
        boundary_edges=new_be,
        boundary_tags=new_tags,
        level=level,
    )


def unit_square(level: int) -> Mesh:
    """Mesh obtained by refining :func:`initial_mesh` ``level`` times."""
    if level < 0:
        raise ValueError(f"level must be >= 0, got {level}")
    m = initial_mesh()
    for _ in range(level):
        m = refine(m)
    return m


def mesh_size(m: Mesh) -> float:
    """Grid spacing ``1/2**level`` (the tabulated ``h``, not the longest edge)."""
    return 1.0 / 2**m.level


def check_conformity(m: Mesh) -> None:
    """Raise ``ValueError`` if edge incidences or boundary tags are inconsistent."""
    edges, tri_edges = m.edges()
    counts = np.bincount(tri_edges.ravel(), minlength=len(edges))
    if np.any(counts > 2) or np.any(counts < 1):
        raise ValueError("edge shared by more than two triangles")
    bnd = edges[counts == 1]
    given = np.sort(m.boundary_edges, axis=1)
    if len(bnd) != len(given) or not np.array_equal(
        bnd, given[np.lexsort((given[:, 1], given[:, 0]))]
    ):
        raise ValueError("boundary edge list does not match edges with one triangle")
    r = m.resolution
    expected = {"left": (0, 0), "right": (0, r), "bottom": (1, 0), "top": (1, r)}
    for (a, b), tag in zip(m.boundary_edges, m.boundary_tags):
        axis, value = expected[tag]
        if m.ivertices[a, axis] != value or m.ivertices[b, axis] != value:
            raise ValueError(f"boundary edge ({a}, {b}) is not on side {tag!r}")
