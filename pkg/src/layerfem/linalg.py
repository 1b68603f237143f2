"""Sparse CSR storage, restarted GMRES and the preconditioners it takes.

GMRES is right-preconditioned (modified Gram-Schmidt Arnoldi with Givens
rotations), so the reported residual history lives in the unpreconditioned
space; the final relative residual is always recomputed from the returned
iterate, never trusted from the recurrence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import get_kernels


@dataclass(eq=False)
class SparseMatrix:
    """Square CSR matrix with int64 index arrays."""
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        self.indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        self.data = np.ascontiguousarray(self.data, dtype=np.float64)
        if self.indptr.shape != (self.n + 1,):
            raise ValueError("indptr must have length n+1")
        if self.indices.shape != self.data.shape:
            raise ValueError("indices and data lengths differ")
        if self.indptr[0] != 0 or self.indptr[-1] != self.indices.size:
            raise ValueError("indptr endpoints inconsistent with nnz")
        if np.any(np.diff(self.indptr) < 0):
            raise ValueError("indptr must be nondecreasing")
        if self.indices.size and (self.indices.min() < 0
                                  or self.indices.max() >= self.n):
            raise ValueError("column index out of range")

    @classmethod
    def from_coo(cls, n: int, rows, cols, vals) -> "SparseMatrix":
        """Build from COO triplets; duplicate entries are summed.

        Duplicates are combined by sorted-order reduction, so the result is
        deterministic for any input ordering of the triplets.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("rows, cols, vals must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= n
                          or cols.min() < 0 or cols.max() >= n):
            raise ValueError("COO index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            fresh = np.empty(rows.size, dtype=bool)
            fresh[0] = True
            fresh[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(fresh)
            rows = rows[starts]
            cols = cols[starts]
            vals = np.add.reduceat(vals, starts)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
        return cls(n=n, indptr=indptr, indices=cols, data=vals)

    @property
    def nnz(self) -> int:
        return self.indices.size

    def diagonal(self) -> np.ndarray:
        diag = np.zeros(self.n)
        for i in range(self.n):
            row = self.indices[self.indptr[i]:self.indptr[i + 1]]
            hit = np.searchsorted(row, i)
            if hit < row.size and row[hit] == i:
                diag[i] = self.data[self.indptr[i] + hit]
        return diag

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n, self.n))
        for i in range(self.n):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            dense[i, self.indices[lo:hi]] = self.data[lo:hi]
        return dense


def spmv(A: SparseMatrix, x: np.ndarray, backend: str | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n,):
        raise ValueError(f"vector length {x.shape} does not match matrix n={A.n}")
    return get_kernels(backend).spmv(A.indptr, A.indices, A.data, x)


class IdentityPreconditioner:
    kind = "none"

    def apply(self, v: np.ndarray) -> np.ndarray:
        return v


class JacobiPreconditioner:
    kind = "jacobi"

    def __init__(self, A: SparseMatrix):
        diag = A.diagonal()
        bad = np.flatnonzero(diag == 0.0)
        if bad.size:
            raise ValueError(f"jacobi preconditioner: zero diagonal at row {bad[0]}")
        self._inv_diag = 1.0 / diag

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self._inv_diag * v


class ILU0Preconditioner:
    """Zero-fill incomplete LU on the CSR sparsity pattern (unit-diagonal L)."""

    kind = "ilu0"

    def __init__(self, A: SparseMatrix, backend: str | None = None):
        self._kernels = get_kernels(backend)
        self._indptr = A.indptr
        self._indices = A.indices
        data = A.data.copy()
        diag_idx = np.empty(A.n, dtype=np.int64)
        for i in range(A.n):
            lo, hi = A.indptr[i], A.indptr[i + 1]
            row = A.indices[lo:hi]
            hit = np.searchsorted(row, i)
            if hit >= row.size or row[hit] != i:
                raise ValueError(f"ILU0: missing diagonal entry at row {i}")
            diag_idx[i] = lo + hit
        bad_row = self._kernels.ilu0_factor(A.indptr, A.indices, data, diag_idx)
        if bad_row >= 0:
            raise ValueError(f"ILU0: zero pivot at row {bad_row}")
        self._data = data
        self._diag_idx = diag_idx

    def apply(self, v: np.ndarray) -> np.ndarray:
        y = self._kernels.solve_lower_unit(
            self._indptr, self._indices, self._data, self._diag_idx, v)
        return self._kernels.solve_upper(
            self._indptr, self._indices, self._data, self._diag_idx, y)


def build_preconditioner(A: SparseMatrix, kind: str | None = "none",
                         backend: str | None = None):
    """kind is one of None/'none', 'jacobi', 'ilu0'."""
    name = "none" if kind is None else str(kind).lower()
    if name == "none":
        return IdentityPreconditioner()
    if name == "jacobi":
        return JacobiPreconditioner(A)
    if name == "ilu0":
        return ILU0Preconditioner(A, backend=backend)
    raise ValueError(f"unknown preconditioner kind {kind!r}")


@dataclass
class SolveStats:
    iterations: int
    restarts: int
    final_rel_residual: float
    converged: bool


def gmres(A: SparseMatrix, rhs: np.ndarray, x0: np.ndarray | None = None,
          restart: int = 60, tol: float = 1e-12, max_outer: int = 200,
          precond=None, backend: str | None = None):
    """Restarted GMRES(restart); returns (x, SolveStats).

    Convergence means the recomputed true residual satisfies
    ||b - Ax|| <= tol * ||b||.
    """
    if restart < 1:
        raise ValueError("restart must be >= 1")
    if precond is None or isinstance(precond, str):
        precond = build_preconditioner(A, precond, backend=backend)
    b = np.asarray(rhs, dtype=np.float64)
    if b.shape != (A.n,):
        raise ValueError(f"rhs length {b.shape} does not match matrix n={A.n}")
    bnorm = float(np.linalg.norm(b))
    x = np.zeros(A.n) if x0 is None else np.array(x0, dtype=np.float64)
    if bnorm == 0.0:
        return np.zeros(A.n), SolveStats(0, 0, 0.0, True)

    iterations = 0
    cycles = 0
    for _ in range(max_outer):
        r = b - spmv(A, x, backend=backend)
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol * bnorm:
            break
        cycles += 1
        V = np.empty((restart + 1, A.n))
        H = np.zeros((restart + 1, restart))
        cs = np.empty(restart)
        sn = np.empty(restart)
        g = np.zeros(restart + 1)
        g[0] = rnorm
        V[0] = r / rnorm
        k = 0
        breakdown = False
        for j in range(restart):
            w = spmv(A, precond.apply(V[j]), backend=backend)
            for i in range(j + 1):
                hij = float(w @ V[i])
                H[i, j] = hij
                w -= hij * V[i]
            hnext = float(np.linalg.norm(w))
            H[j + 1, j] = hnext
            iterations += 1
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            denom = math.hypot(H[j, j], H[j + 1, j])
            if denom == 0.0:
                cs[j], sn[j] = 1.0, 0.0
            else:
                cs[j] = H[j, j] / denom
                sn[j] = H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            k = j + 1
            if hnext == 0.0:
                breakdown = True          # exact Krylov invariance
                break
            V[j + 1] = w / hnext
            if abs(g[k]) <= tol * bnorm:
                break
        if k > 0:
            y = np.zeros(k)
            for i in range(k - 1, -1, -1):
                y[i] = (g[i] - H[i, i + 1:k] @ y[i + 1:k]) / H[i, i]
            x = x + precond.apply(V[:k].T @ y)
        if breakdown:
            break

    true_res = float(np.linalg.norm(b - spmv(A, x, backend=backend)))
    rel = true_res / bnorm
    return x, SolveStats(iterations=iterations, restarts=max(0, cycles - 1),
                         final_rel_residual=rel, converged=bool(rel <= tol))
