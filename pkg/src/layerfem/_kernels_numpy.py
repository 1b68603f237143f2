"""Pure-numpy kernel implementations.

These are the fallback twins of the numba kernels in ``_kernels_numba``.
Every function here must keep the exact signature of its jitted twin so the
backend dispatch can swap them freely.
"""
from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"


def spmv(indptr: np.ndarray, indices: np.ndarray, data: np.ndarray,
         x: np.ndarray) -> np.ndarray:
    """CSR matrix-vector product via segmented reduction."""
    n = indptr.size - 1
    y = np.zeros(n, dtype=np.float64)
    if data.size == 0:
        return y
    prod = data * x[indices]
    nz = np.diff(indptr) > 0
    # reduceat needs one offset per nonempty row; empty rows stay zero
    y[nz] = np.add.reduceat(prod, indptr[:-1][nz])
    return y


def ilu0_factor(indptr: np.ndarray, indices: np.ndarray, data: np.ndarray,
                diag_idx: np.ndarray) -> int:
    """In-place ILU(0) on CSR data with sorted column indices.

    Returns -1 on success, else the row index of the first zero pivot.
    L carries a unit diagonal (not stored); multipliers overwrite the strictly
    lower entries, U overwrites diagonal and upper entries.
    """
    n = indptr.size - 1
    for i in range(n):
        row_start = indptr[i]
        row_end = indptr[i + 1]
        cols_i = indices[row_start:row_end]
        for pk in range(row_start, diag_idx[i]):
            k = indices[pk]
            ukk = data[diag_idx[k]]
            if ukk == 0.0:
                return k
            lik = data[pk] / ukk
            data[pk] = lik
            ks = diag_idx[k] + 1
            ke = indptr[k + 1]
            if ks == ke:
                continue
            cols_k = indices[ks:ke]
            pos = np.searchsorted(cols_i, cols_k) + row_start
            inside = pos < row_end
            hit = inside.copy()
            hit[inside] = indices[pos[inside]] == cols_k[inside]
            data[pos[hit]] -= lik * data[ks:ke][hit]
    return -1


def solve_lower_unit(indptr: np.ndarray, indices: np.ndarray, data: np.ndarray,
                     diag_idx: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Forward substitution with the unit-diagonal L of an ILU(0) factor."""
    y = b.astype(np.float64).copy()
    for i in range(y.size):
        s = indptr[i]
        d = diag_idx[i]
        if d > s:
            y[i] -= data[s:d] @ y[indices[s:d]]
    return y


def solve_upper(indptr: np.ndarray, indices: np.ndarray, data: np.ndarray,
                diag_idx: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Backward substitution with the U factor (diagonal stored)."""
    x = y.astype(np.float64).copy()
    for i in range(x.size - 1, -1, -1):
        d = diag_idx[i]
        e = indptr[i + 1]
        if e > d + 1:
            x[i] -= data[d + 1:e] @ x[indices[d + 1:e]]
        x[i] /= data[d]
    return x


def tri_local(hx: np.ndarray, hy: np.ndarray, delta: np.ndarray,
              bq: np.ndarray, cq: np.ndarray, fq: np.ndarray,
              wq: np.ndarray, nsh: np.ndarray,
              sx: np.ndarray, sy: np.ndarray, eps: float):
    """Batched P1 local SDFEM matrices and load vectors on triangles.

    hx, hy, delta: (nc,) parent-rectangle widths and stabilization weights.
    bq, cq, fq: (nc, nq) coefficient samples at the mapped quadrature points.
    wq: (nq,) reference weights (sum 1/2); nsh: (3, nq) shape values.
    sx, sy: (3,) integer gradient stencils; physical grads are sx/hx, sy/hy.
    Returns (avals (nc,3,3), bvals (nc,3)) with avals[c,r,s] the row-r
    (test), column-s (trial) entry.
    """
    gx = sx[None, :] / hx[:, None]
    gy = sy[None, :] / hy[:, None]
    wd = wq[None, :] * (hx * hy)[:, None]
    test = nsh[None, :, :] + (delta[:, None] * bq)[:, None, :] * gx[:, :, None]
    trial = bq[:, None, :] * gx[:, :, None] + cq[:, None, :] * nsh[None, :, :]
    avals = np.einsum("cq,crq,csq->crs", wd, test, trial, optimize=True)
    # constant gradients: the diffusion block needs only the cell area
    area = wd.sum(axis=1)
    gdot = gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :]
    avals += eps * area[:, None, None] * gdot
    bvals = np.einsum("cq,crq->cr", wd * fq, test, optimize=True)
    return avals, bvals


def quad_local(hx: np.ndarray, hy: np.ndarray, delta: np.ndarray,
               bq: np.ndarray, cq: np.ndarray, fq: np.ndarray,
               wq: np.ndarray, xi: np.ndarray, eta: np.ndarray, eps: float):
    """Batched Q1 local SDFEM matrices and load vectors on axis-aligned quads.

    Same conventions as tri_local; xi, eta are the (nq,) tensor-Gauss
    reference coordinates on [-1,1]^2, vertex order counterclockwise from
    the lower-left corner.
    """
    xa = np.array([-1.0, 1.0, 1.0, -1.0])
    ya = np.array([-1.0, -1.0, 1.0, 1.0])
    nsh = 0.25 * (1.0 + xa[:, None] * xi[None, :]) * (1.0 + ya[:, None] * eta[None, :])
    # physical grads: d/dx = (2/hx) d/dxi with dN/dxi = xa(1+ya*eta)/4
    gx = (0.5 * xa[:, None] * (1.0 + ya[:, None] * eta[None, :]))[None, :, :] / hx[:, None, None]
    gy = (0.5 * ya[:, None] * (1.0 + xa[:, None] * xi[None, :]))[None, :, :] / hy[:, None, None]
    wd = wq[None, :] * (0.25 * hx * hy)[:, None]
    test = nsh[None, :, :] + delta[:, None, None] * bq[:, None, :] * gx
    trial = bq[:, None, :] * gx + cq[:, None, :] * nsh[None, :, :]
    avals = np.einsum("cq,crq,csq->crs", wd, test, trial, optimize=True)
    avals += eps * np.einsum("cq,crq,csq->crs", wd, gx, gx, optimize=True)
    avals += eps * np.einsum("cq,crq,csq->crs", wd, gy, gy, optimize=True)
    bvals = np.einsum("cq,crq->cr", wd * fq, test, optimize=True)
    return avals, bvals
