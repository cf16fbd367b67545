"""Sparse direct factorizations and a smallest generalized eigenpair routine."""
from __future__ import annotations

import threading

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a matrix is structurally or numerically singular."""


class ConvergenceError(RuntimeError):
    pass


# relative pivot size below which a matrix is reported singular
PIVOT_TOLERANCE = 1e-13


class Factorization:
    """LU factorization of a square sparse matrix (SuperLU, COLAMD ordering).

    Real and complex matrices are supported.
    Solves are serialized with a lock so one factorization can be shared
    between threads.
    """

    def __init__(self, matrix, role: str = "general"):
        dtype = complex if np.iscomplexobj(matrix.data if sp.issparse(matrix) else matrix) \
            else float
        A = sp.csc_matrix(matrix, dtype=dtype)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got shape {A.shape}")
        self.role = role
        self.dimension = A.shape[0]
        self.is_complex = dtype is complex
        self._lock = threading.Lock()
        try:
            self._lu = spla.splu(A, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SingularMatrixError(f"{role} matrix is singular: {exc}") from exc
        d = np.abs(self._lu.U.diagonal())
        if d.size and (not np.all(np.isfinite(d)) or d.min() <= PIVOT_TOLERANCE * d.max()):
            raise SingularMatrixError(
                f"{role} matrix is numerically singular "
                f"(pivot ratio {d.min() / d.max():.2e})"
            )

    def solve(self, rhs) -> np.ndarray:
        b = np.asarray(rhs)
        with self._lock:
            if self.is_complex:
                return self._lu.solve(b.astype(complex))
            if np.iscomplexobj(b):
                return self._lu.solve(b.real.copy()) + 1j * self._lu.solve(b.imag.copy())
            return self._lu.solve(b.astype(float))

    def __repr__(self):
        return f"Factorization(role={self.role!r}, dimension={self.dimension})"


def factor(matrix, role: str = "general") -> Factorization:
    return Factorization(matrix, role)


def solve(fact: Factorization, rhs) -> np.ndarray:
    return fact.solve(rhs)


def min_generalized_eig(S, M, solve_S=None, tol: float = 1e-10, maxiter: int = 5000,
                        seed: int = 0):
    """Smallest eigenpair of ``S q = lam M q`` for symmetric positive definite ``S``, ``M``.

    Uses ARPACK's shift-invert Lanczos mode at ``sigma = 0``, so only
    ``S^{-1}`` is needed: ``solve_S(y)`` applies it (a direct factorization of
    ``S`` is used when omitted).  ``S`` may be any object supporting ``@``.
    The starting vector is seeded, so results are reproducible.

    Returns ``(lam, q)`` with ``q^T M q = 1``.

    Raises
    ------
    ConvergenceError
        If ARPACK does not converge within ``maxiter`` restarts.
    """
    M = sp.csr_matrix(M) if sp.issparse(M) else np.asarray(M, dtype=float)
    n = M.shape[0]
    if solve_S is None:
        fS = factor(S, role="spd")
        solve_S = fS.solve
    if n <= 3:
        Sd = np.column_stack([S @ e for e in np.eye(n)])
        Md = M.toarray() if sp.issparse(M) else M
        lam, vec = sla.eigh(0.5 * (Sd + Sd.T), Md)
        return float(lam[0]), vec[:, 0]

    matvec = lambda q: S @ q  # noqa: E731
    Sop = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    OPinv = spla.LinearOperator((n, n), matvec=solve_S, dtype=float)
    v0 = np.random.default_rng(seed).standard_normal(n)
    try:
        lam, vec = spla.eigsh(Sop, k=1, M=M, sigma=0.0, which="LM", OPinv=OPinv,
                              v0=v0, tol=tol, maxiter=maxiter)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"eigensolver did not converge: {exc}") from exc
    q = vec[:, 0]
    q = q / np.sqrt(q @ (M @ q))
    return float(lam[0]), q
