"""Numba-jitted kernel twins of ``_kernels_numpy``.

Importing this module requires numba; the backend dispatcher guards that.
Signatures must stay byte-compatible with the numpy twins.
"""
from __future__ import annotations

import numpy as np
from numba import njit

BACKEND_NAME = "numba"


@njit(cache=True)
def spmv(indptr, indices, data, x):
    n = indptr.size - 1
    y = np.zeros(n, dtype=np.float64)
    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        y[i] = acc
    return y


@njit(cache=True)
def ilu0_factor(indptr, indices, data, diag_idx):
    n = indptr.size - 1
    for i in range(n):
        row_end = indptr[i + 1]
        for pk in range(indptr[i], diag_idx[i]):
            k = indices[pk]
            ukk = data[diag_idx[k]]
            if ukk == 0.0:
                return k
            lik = data[pk] / ukk
            data[pk] = lik
            for pj in range(diag_idx[k] + 1, indptr[k + 1]):
                col = indices[pj]
                lo = pk + 1
                hi = row_end - 1
                while lo <= hi:
                    mid = (lo + hi) >> 1
                    c = indices[mid]
                    if c < col:
                        lo = mid + 1
                    elif c > col:
                        hi = mid - 1
                    else:
                        data[mid] -= lik * data[pj]
                        break
    return -1


@njit(cache=True)
def solve_lower_unit(indptr, indices, data, diag_idx, b):
    n = b.size
    y = np.empty(n, dtype=np.float64)
    for i in range(n):
        acc = b[i]
        for p in range(indptr[i], diag_idx[i]):
            acc -= data[p] * y[indices[p]]
        y[i] = acc
    return y


@njit(cache=True)
def solve_upper(indptr, indices, data, diag_idx, y):
    n = y.size
    x = np.empty(n, dtype=np.float64)
    for i in range(n - 1, -1, -1):
        acc = y[i]
        for p in range(diag_idx[i] + 1, indptr[i + 1]):
            acc -= data[p] * x[indices[p]]
        x[i] = acc / data[diag_idx[i]]
    return x


@njit(cache=True)
def tri_local(hx, hy, delta, bq, cq, fq, wq, nsh, sx, sy, eps):
    nc, nq = bq.shape
    avals = np.empty((nc, 3, 3), dtype=np.float64)
    bvals = np.empty((nc, 3), dtype=np.float64)
    for c in range(nc):
        det = hx[c] * hy[c]
        area = 0.0
        for q in range(nq):
            area += wq[q] * det
        for r in range(3):
            gxr = sx[r] / hx[c]
            gyr = sy[r] / hy[c]
            rhs = 0.0
            for s in range(3):
                gxs = sx[s] / hx[c]
                gys = sy[s] / hy[c]
                acc = eps * area * (gxr * gxs + gyr * gys)
                for q in range(nq):
                    wd = wq[q] * det
                    test = nsh[r, q] + delta[c] * bq[c, q] * gxr
                    acc += wd * (bq[c, q] * gxs + cq[c, q] * nsh[s, q]) * test
                avals[c, r, s] = acc
            for q in range(nq):
                wd = wq[q] * det
                test = nsh[r, q] + delta[c] * bq[c, q] * gxr
                rhs += wd * fq[c, q] * test
            bvals[c, r] = rhs
    return avals, bvals


@njit(cache=True)
def quad_local(hx, hy, delta, bq, cq, fq, wq, xi, eta, eps):
    nc, nq = bq.shape
    xa = np.array([-1.0, 1.0, 1.0, -1.0])
    ya = np.array([-1.0, -1.0, 1.0, 1.0])
    nsh = np.empty((4, nq), dtype=np.float64)
    gxr = np.empty((4, nq), dtype=np.float64)
    gyr = np.empty((4, nq), dtype=np.float64)
    for v in range(4):
        for q in range(nq):
            nsh[v, q] = 0.25 * (1.0 + xa[v] * xi[q]) * (1.0 + ya[v] * eta[q])
            gxr[v, q] = 0.5 * xa[v] * (1.0 + ya[v] * eta[q])
            gyr[v, q] = 0.5 * ya[v] * (1.0 + xa[v] * xi[q])
    avals = np.empty((nc, 4, 4), dtype=np.float64)
    bvals = np.empty((nc, 4), dtype=np.float64)
    for c in range(nc):
        det = 0.25 * hx[c] * hy[c]
        for r in range(4):
            rhs = 0.0
            for s in range(4):
                acc = 0.0
                for q in range(nq):
                    wd = wq[q] * det
                    gxrq = gxr[r, q] / hx[c]
                    gyrq = gyr[r, q] / hy[c]
                    gxsq = gxr[s, q] / hx[c]
                    gysq = gyr[s, q] / hy[c]
                    test = nsh[r, q] + delta[c] * bq[c, q] * gxrq
                    acc += wd * (eps * (gxrq * gxsq + gyrq * gysq)
                                 + (bq[c, q] * gxsq + cq[c, q] * nsh[s, q]) * test)
                avals[c, r, s] = acc
            for q in range(nq):
                wd = wq[q] * det
                test = nsh[r, q] + delta[c] * bq[c, q] * gxr[r, q] / hx[c]
                rhs += wd * fq[c, q] * test
            bvals[c, r] = rhs
    return avals, bvals
