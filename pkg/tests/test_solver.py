import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp

from biotfem.solver import (
    ConvergenceError,
    Factorization,
    SingularMatrixError,
    factor,
    min_generalized_eig,
    solve,
)


def _spd(rng, n):
    Q = rng.standard_normal((n, n))
    return sp.csr_matrix(Q @ Q.T + n * np.eye(n))


def test_real_solve(rng):
    A = _spd(rng, 30)
    b = rng.standard_normal(30)
    x = solve(factor(A, role="spd"), b)
    np.testing.assert_allclose(A @ x, b, atol=1e-12)


def test_real_factor_with_complex_rhs(rng):
    A = _spd(rng, 20)
    b = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    x = factor(A).solve(b)
    assert np.iscomplexobj(x)
    np.testing.assert_allclose(A @ x, b, atol=1e-12)


def test_complex_factor(rng):
    A = _spd(rng, 20).astype(complex) + 0.7j * sp.identity(20)
    f = Factorization(A)
    assert f.is_complex
    b = rng.standard_normal(20)
    np.testing.assert_allclose(A @ f.solve(b), b, atol=1e-12)


def test_multiple_right_hand_sides(rng):
    A = _spd(rng, 15)
    B = rng.standard_normal((15, 4))
    np.testing.assert_allclose(A @ factor(A).solve(B), B, atol=1e-12)


def test_singular_matrix_detected():
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularMatrixError):
        factor(A, role="test")
    Z = sp.csr_matrix((3, 3))
    with pytest.raises(SingularMatrixError):
        factor(Z)


def test_non_square_rejected():
    with pytest.raises(ValueError):
        factor(sp.csr_matrix(np.ones((2, 3))))


@pytest.mark.parametrize("n", [3, 40])
def test_min_generalized_eig_matches_dense(rng, n):
    S = _spd(rng, n)
    M = _spd(rng, n)
    lam, q = min_generalized_eig(S, M, tol=1e-12)
    ref = sla.eigh(S.toarray(), M.toarray(), eigvals_only=True)[0]
    assert abs(lam - ref) < 1e-10 * ref
    assert abs(q @ (M @ q) - 1) < 1e-12
    np.testing.assert_allclose(S @ q, lam * (M @ q), atol=1e-8)


def test_min_generalized_eig_reproducible(rng):
    S = _spd(rng, 25)
    M = sp.identity(25, format="csr")
    a = min_generalized_eig(S, M, seed=3)
    b = min_generalized_eig(S, M, seed=3)
    assert a[0] == b[0]


def test_min_generalized_eig_reports_non_convergence(rng):
    S = _spd(rng, 200)
    M = sp.identity(200, format="csr")
    with pytest.raises(ConvergenceError):
        min_generalized_eig(S, M, tol=1e-16, maxiter=1)
