"""Reference-triangle Lagrange elements and quadrature rules.

The reference triangle is ``{(x, y) : x, y >= 0, x + y <= 1}`` with
barycentric coordinates ``(1 - x - y, x, y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre
from scipy.special import roots_jacobi

MAX_DEGREE = 4
MAX_QUADRATURE_DEGREE = 10


def lattice(degree: int) -> np.ndarray:
    """Multi-indices ``(i, j)`` of the principal lattice, ``i + j <= degree``.

    Ordered row by row in ``j``; node ``(i, j)`` sits at ``(i, j) / degree``.
    """
    return np.array([(i, j) for j in range(degree + 1) for i in range(degree + 1 - j)])


class ReferenceElement:
    """Scalar Lagrange element of a given degree on the reference triangle.

    Basis functions are the Silvester products of shifted barycentric
    factors; ``basis_i(node_j) = delta_ij``.
    """

    def __init__(self, degree: int):
        if not 1 <= degree <= MAX_DEGREE:
            raise ValueError(f"degree must be in 1..{MAX_DEGREE}, got {degree}")
        self.degree = degree
        self.multi_indices = lattice(degree)
        self.nodes = self.multi_indices / degree
        k = degree
        ij = self.multi_indices
        # barycentric multi-index (a, b, c) for (lambda0, lambda1, lambda2)
        self._abc = np.stack([k - ij[:, 0] - ij[:, 1], ij[:, 0], ij[:, 1]], axis=1)

    @property
    def n_basis(self) -> int:
        return len(self.nodes)

    def _factors(self, points):
        """Values and derivatives of ``R_m(lambda)`` for all ``m <= degree``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lam = np.stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]], axis=1)
        k = self.degree
        n = pts.shape[0]
        R = np.ones((k + 1, n, 3))
        dR = np.zeros((k + 1, n, 3))
        for m in range(1, k + 1):
            fac = (k * lam - (m - 1)) / m
            R[m] = R[m - 1] * fac
            dR[m] = dR[m - 1] * fac + R[m - 1] * (k / m)
        return R, dR

    def eval(self, points) -> np.ndarray:
        """Basis values, shape ``(npoints, n_basis)``."""
        R, _ = self._factors(points)
        a, b, c = self._abc.T
        return R[a, :, 0].T * R[b, :, 1].T * R[c, :, 2].T

    def grad(self, points) -> np.ndarray:
        """Basis gradients, shape ``(npoints, n_basis, 2)``."""
        R, dR = self._factors(points)
        a, b, c = self._abc.T
        r0, r1, r2 = R[a, :, 0].T, R[b, :, 1].T, R[c, :, 2].T
        d0 = dR[a, :, 0].T * r1 * r2
        d1 = r0 * dR[b, :, 1].T * r2
        d2 = r0 * r1 * dR[c, :, 2].T
        return np.stack([d1 - d0, d2 - d0], axis=-1)


@lru_cache(maxsize=None)
def reference_element(degree: int) -> ReferenceElement:
    return ReferenceElement(degree)


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    def __len__(self):
        return len(self.weights)


@lru_cache(maxsize=None)
def triangle_quadrature(exactness_degree: int) -> QuadratureRule:
    """Quadrature on the reference triangle exact up to the given degree.

    Degrees 0-1 use the centroid, degree 2 the symmetric edge-midpoint rule;
    higher degrees use a collapsed (Duffy) product of Gauss-Legendre and
    Gauss-Jacobi(1, 0) points, which keeps all weights positive.
    """
    d = exactness_degree
    if not 0 <= d <= MAX_QUADRATURE_DEGREE:
        raise ValueError(f"quadrature degree must be in 0..{MAX_QUADRATURE_DEGREE}, got {d}")
    if d <= 1:
        return QuadratureRule(np.array([[1 / 3, 1 / 3]]), np.array([0.5]), d)
    if d == 2:
        pts = np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])
        return QuadratureRule(pts, np.full(3, 1 / 6), d)
    n = math.ceil((d + 1) / 2)
    xg, wg = legendre.leggauss(n)
    xi, wxi = (xg + 1) / 2, wg / 2
    tj, wj = roots_jacobi(n, 1.0, 0.0)
    eta, weta = (tj + 1) / 2, wj / 4
    X, E = np.meshgrid(xi, eta, indexing="ij")
    W = np.outer(wxi, weta)
    pts = np.stack([(X * (1 - E)).ravel(), E.ravel()], axis=1)
    return QuadratureRule(pts, W.ravel(), d)


@dataclass(frozen=True)
class LobattoPoints:
    s: int
    nodes: np.ndarray
    weights: np.ndarray


@lru_cache(maxsize=None)
def lobatto_points(s: int) -> LobattoPoints:
    """Gauss-Lobatto nodes and weights on ``[0, 1]``, exact to degree ``2s - 3``."""
    if s not in (2, 3, 4):
        raise ValueError(f"number of Lobatto points must be 2, 3 or 4, got {s}")
    c = np.zeros(s)
    c[-1] = 1.0  # Legendre P_{s-1}
    interior = np.sort(legendre.legroots(legendre.legder(c))) if s > 2 else np.empty(0)
    x = np.concatenate([[-1.0], interior, [1.0]])
    w = 2.0 / (s * (s - 1) * legendre.legval(x, c) ** 2)
    nodes = (x + 1) / 2
    nodes[0], nodes[-1] = 0.0, 1.0
    return LobattoPoints(s, nodes, w / 2)
