import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from hsymcurl.solver import (
    ConvergenceError, IndefiniteMatrixError, SingularMatrixError, cg_solve, dense_solve,
)


def _spd(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    return B @ B.T + n * np.eye(n)


def test_identity_one_iteration():
    b = np.arange(1.0, 6.0)
    x, it, res = cg_solve(sp.identity(5, format="csr"), b)
    assert it == 1 and np.allclose(x, b)


def test_two_by_two():
    x, _, _ = cg_solve(sp.csr_matrix([[4.0, 1], [1, 3]]), np.array([1.0, 2]))
    assert np.allclose(x, [1 / 11, 7 / 11], rtol=1e-10)


def test_zero_rhs():
    x, it, res = cg_solve(sp.identity(3, format="csr"), np.zeros(3))
    assert it == 0 and np.all(x == 0)


def test_indefinite_detected():
    A = sp.csr_matrix(np.diag([1.0, -1.0, 2.0]))
    with pytest.raises(IndefiniteMatrixError):
        cg_solve(A, np.ones(3), preconditioner=None)
    with pytest.raises(IndefiniteMatrixError):
        cg_solve(A, np.ones(3))
    A = sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(IndefiniteMatrixError) as info:
        cg_solve(A, np.array([1.0, -1.0]))
    assert info.value.iteration >= 1 and info.value.curvature <= 0


def test_non_convergence():
    A = sp.csr_matrix(_spd(30, 0))
    with pytest.raises(ConvergenceError):
        cg_solve(A, np.ones(30), rel_tol=1e-14, max_iter=2)


def test_unknown_preconditioner():
    with pytest.raises(ValueError):
        cg_solve(sp.identity(2, format="csr"), np.ones(2), preconditioner="ilu")


@given(st.integers(2, 40), st.integers(0, 10 ** 6))
def test_cg_matches_dense(n, seed):
    A = _spd(n, seed)
    b = np.random.default_rng(seed + 1).standard_normal(n)
    for pre in ("jacobi", None):
        x, it, res = cg_solve(sp.csr_matrix(A), b, rel_tol=1e-12, preconditioner=pre)
        assert np.linalg.norm(A @ x - b) <= 1e-11 * np.linalg.norm(b)
        assert res <= 1e-11


def test_a_norm_error_monotone():
    n = 60
    A = _spd(n, 7) + np.diag(np.linspace(1, 500, n))
    b = np.random.default_rng(3).standard_normal(n)
    x_star = np.linalg.solve(A, b)
    iterates = []
    cg_solve(sp.csr_matrix(A), b, rel_tol=1e-13, callback=iterates.append)
    errs = [(x - x_star) @ A @ (x - x_star) for x in iterates]
    assert len(errs) > 5
    assert all(e2 <= e1 * (1 + 1e-10) + 1e-26 for e1, e2 in zip(errs, errs[1:]))


def test_history_recorded_and_deterministic():
    A = sp.csr_matrix(_spd(25, 2))
    b = np.ones(25)
    h1, h2 = [], []
    x1, *_ = cg_solve(A, b, history=h1)
    x2, *_ = cg_solve(A, b, history=h2)
    assert h1 == h2 and np.array_equal(x1, x2) and h1[-1] <= 1e-10


def test_dense_examples():
    assert np.allclose(dense_solve(np.array([[2.0]]), np.array([4.0])), 2.0)
    A = _spd(50, 11)
    assert np.allclose(dense_solve(A, A @ np.ones(50)), 1.0, atol=1e-10)
    H = 1.0 / (np.arange(6)[:, None] + np.arange(6)[None, :] + 1.0)
    assert np.allclose(dense_solve(H, H @ np.ones(6)), 1.0, atol=1e-6)
    assert np.allclose(dense_solve(sp.csr_matrix(A), A @ np.ones(50)), 1.0, atol=1e-10)


def test_dense_indefinite_symmetric():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(dense_solve(A, np.array([2.0, 3.0])), [3.0, 2.0])


def test_dense_singular_and_size():
    with pytest.raises(SingularMatrixError):
        dense_solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.ones(2))
    with pytest.raises(ValueError):
        dense_solve(np.eye(2001), np.ones(2001))
