"""CSR container, sparse kernels, preconditioners, restarted GMRES."""
import numpy as np
import pytest
from hypothesis import given, strategies as st

from layerfem.linalg import (SparseMatrix, build_preconditioner, gmres, spmv)


def _random_csr(rng, n, density=0.3, diag_boost=0.0):
    dense = rng.standard_normal((n, n))
    dense[rng.random((n, n)) > density] = 0.0
    dense += np.eye(n) * (diag_boost + 1.0)
    rows, cols = np.nonzero(dense)
    return SparseMatrix.from_coo(n, rows, cols, dense[rows, cols]), dense


def test_from_coo_merges_duplicates():
    rows = np.array([0, 0, 1, 0])
    cols = np.array([1, 1, 0, 0])
    vals = np.array([2.0, 3.0, 4.0, 1.0])
    A = SparseMatrix.from_coo(2, rows, cols, vals)
    assert A.nnz == 3
    np.testing.assert_array_equal(A.to_dense(), [[1.0, 5.0], [4.0, 0.0]])
    np.testing.assert_array_equal(A.diagonal(), [1.0, 0.0])


def test_csr_consistency_checks():
    with pytest.raises(ValueError):
        SparseMatrix(2, np.array([0, 1]), np.array([0]), np.array([1.0]))
    with pytest.raises(ValueError):
        SparseMatrix(2, np.array([0, 1, 1]), np.array([5]), np.array([1.0]))
    with pytest.raises(ValueError):
        SparseMatrix(2, np.array([0, 2, 1]), np.array([0, 1]),
                     np.array([1.0, 2.0]))


def test_spmv_matches_dense(backend):
    rng = np.random.default_rng(7)
    A, dense = _random_csr(rng, 23)
    x = rng.standard_normal(23)
    np.testing.assert_allclose(spmv(A, x, backend=backend), dense @ x,
                               rtol=1e-13, atol=1e-13)


@given(st.integers(1, 12), st.integers(0, 2 ** 31 - 1))
def test_spmv_property(n, seed):
    rng = np.random.default_rng(seed)
    A, dense = _random_csr(rng, n, density=0.5)
    x = rng.standard_normal(n)
    np.testing.assert_allclose(spmv(A, x), dense @ x, rtol=1e-12, atol=1e-12)


def test_jacobi_preconditioner():
    A = SparseMatrix.from_coo(2, np.array([0, 1]), np.array([0, 1]),
                              np.array([4.0, 0.5]))
    M = build_preconditioner(A, "jacobi")
    np.testing.assert_allclose(M.apply(np.array([8.0, 1.0])), [2.0, 2.0])


def test_jacobi_rejects_zero_diagonal():
    A = SparseMatrix.from_coo(2, np.array([0, 1]), np.array([1, 0]),
                              np.array([1.0, 1.0]))
    with pytest.raises(ValueError, match="row"):
        build_preconditioner(A, "jacobi")


def test_ilu0_exact_on_tridiagonal(backend):
    # no fill-in outside a tridiagonal pattern, so ILU(0) is a full LU
    n = 8
    rows, cols, vals = [], [], []
    for i in range(n):
        rows.append(i); cols.append(i); vals.append(2.0)
        if i > 0:
            rows.append(i); cols.append(i - 1); vals.append(-1.0)
            rows.append(i - 1); cols.append(i); vals.append(-1.0)
    A = SparseMatrix.from_coo(n, np.array(rows), np.array(cols),
                              np.array(vals))
    M = build_preconditioner(A, "ilu0", backend=backend)
    b = np.arange(1.0, n + 1.0)
    np.testing.assert_allclose(M.apply(b), np.linalg.solve(A.to_dense(), b),
                               rtol=1e-12)


def test_ilu0_zero_pivot():
    A = SparseMatrix.from_coo(2, np.array([0, 0, 1, 1]),
                              np.array([0, 1, 0, 1]),
                              np.array([0.0, 1.0, 1.0, 1.0]))
    with pytest.raises(ValueError, match="pivot"):
        build_preconditioner(A, "ilu0")


def test_ilu0_missing_diagonal():
    A = SparseMatrix.from_coo(2, np.array([0, 0, 1]), np.array([0, 1, 0]),
                              np.array([2.0, 1.0, 1.0]))
    with pytest.raises(ValueError, match="diagonal"):
        build_preconditioner(A, "ilu0")


def test_build_preconditioner_kinds():
    A = SparseMatrix.from_coo(1, np.array([0]), np.array([0]),
                              np.array([2.0]))
    x = np.array([6.0])
    assert build_preconditioner(A, None).apply(x)[0] == 6.0
    assert build_preconditioner(A, "none").apply(x)[0] == 6.0
    assert build_preconditioner(A, "jacobi").apply(x)[0] == 3.0
    with pytest.raises(ValueError):
        build_preconditioner(A, "ssor")


def test_gmres_2x2_oracle():
    # [[4,1],[1,3]] x = (1,2)  =>  x = (1/11, 7/11)
    A = SparseMatrix.from_coo(2, np.array([0, 0, 1, 1]),
                              np.array([0, 1, 0, 1]),
                              np.array([4.0, 1.0, 1.0, 3.0]))
    x, stats = gmres(A, np.array([1.0, 2.0]), tol=1e-14)
    np.testing.assert_allclose(x, [1.0 / 11.0, 7.0 / 11.0], rtol=1e-12)
    assert stats.converged
    assert stats.iterations <= 2
    assert stats.final_rel_residual <= 1e-14


@pytest.mark.parametrize("precond", ["none", "jacobi", "ilu0"])
def test_gmres_random_system(precond, backend):
    rng = np.random.default_rng(42)
    A, dense = _random_csr(rng, 40, density=0.2, diag_boost=4.0)
    b = rng.standard_normal(40)
    x, stats = gmres(A, b, tol=1e-12, precond=precond, backend=backend)
    assert stats.converged
    np.testing.assert_allclose(x, np.linalg.solve(dense, b), rtol=1e-9)
    # reported residual is the true unpreconditioned one
    res = np.linalg.norm(b - dense @ x) / np.linalg.norm(b)
    assert res <= 1e-12
    assert stats.final_rel_residual == pytest.approx(res, rel=1e-6)


def test_gmres_restart_cycles():
    rng = np.random.default_rng(3)
    A, dense = _random_csr(rng, 30, density=0.3, diag_boost=2.0)
    b = rng.standard_normal(30)
    x, stats = gmres(A, b, restart=5, tol=1e-12, max_outer=200)
    assert stats.converged
    assert stats.restarts > 0
    np.testing.assert_allclose(x, np.linalg.solve(dense, b), rtol=1e-8)


def test_gmres_reports_nonconvergence():
    rng = np.random.default_rng(11)
    A, _ = _random_csr(rng, 30, density=0.3, diag_boost=0.2)
    b = rng.standard_normal(30)
    x, stats = gmres(A, b, restart=2, max_outer=1, tol=1e-15)
    assert not stats.converged
    assert stats.final_rel_residual > 1e-15
    assert np.all(np.isfinite(x))


def test_gmres_zero_initial_residual():
    A = SparseMatrix.from_coo(3, np.arange(3), np.arange(3), np.ones(3))
    b = np.array([1.0, 2.0, 3.0])
    x, stats = gmres(A, b, x0=b.copy(), tol=1e-12)
    assert stats.converged
    assert stats.iterations == 0
    np.testing.assert_array_equal(x, b)


def test_gmres_identity_happy_breakdown():
    A = SparseMatrix.from_coo(4, np.arange(4), np.arange(4), np.ones(4))
    b = np.array([1.0, -2.0, 3.0, 0.5])
    x, stats = gmres(A, b, tol=1e-14)
    assert stats.converged and stats.iterations == 1
    np.testing.assert_allclose(x, b, rtol=1e-14)
