"""Reference elements, shape functions, Gauss quadrature and physical maps.

Conventions: reference triangle (0,0),(1,0),(0,1); reference quad [-1,1]^2
with vertices counterclockwise from (-1,-1).  Triangle rule weights sum to
1/2, quad rule weights to 4 (the reference measures).
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .mesh import Cell, CellKind


class ElementKind(Enum):
    P1_TRI = "p1_tri"
    Q1_QUAD = "q1_quad"


@dataclass(frozen=True)
class ReferenceElement:
    kind: ElementKind
    n_nodes: int


P1_TRI = ReferenceElement(ElementKind.P1_TRI, 3)
Q1_QUAD = ReferenceElement(ElementKind.Q1_QUAD, 4)


def reference_element(kind) -> ReferenceElement:
    """Accepts ElementKind, CellKind, or their string values."""
    if isinstance(kind, ReferenceElement):
        return kind
    if isinstance(kind, CellKind):
        return Q1_QUAD if kind is CellKind.QUAD else P1_TRI
    if isinstance(kind, ElementKind):
        return P1_TRI if kind is ElementKind.P1_TRI else Q1_QUAD
    try:
        return reference_element(ElementKind(kind))
    except ValueError:
        return reference_element(CellKind(kind))


# Q1 vertex signs, counterclockwise from (-1,-1)
_QX = np.array([-1.0, 1.0, 1.0, -1.0])
_QY = np.array([-1.0, -1.0, 1.0, 1.0])


def shape_eval(element: ReferenceElement, ref_point):
    """Shape values and reference-coordinate gradients.

    ref_point may be a single (2,) point or an (m,2) batch; values come back
    as (n,) or (m,n), gradients as (n,2) or (m,n,2).
    """
    element = reference_element(element)
    pt = np.asarray(ref_point, dtype=np.float64)
    single = pt.ndim == 1
    pts = pt[None, :] if single else pt
    xi, eta = pts[:, 0], pts[:, 1]
    if element.kind is ElementKind.P1_TRI:
        vals = np.stack([1.0 - xi - eta, xi, eta], axis=1)
        grads = np.broadcast_to(
            np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]),
            (pts.shape[0], 3, 2)).copy()
    else:
        vals = 0.25 * (1.0 + xi[:, None] * _QX) * (1.0 + eta[:, None] * _QY)
        grads = np.empty((pts.shape[0], 4, 2))
        grads[:, :, 0] = 0.25 * _QX * (1.0 + eta[:, None] * _QY)
        grads[:, :, 1] = 0.25 * _QY * (1.0 + xi[:, None] * _QX)
    if single:
        return vals[0], grads[0]
    return vals, grads


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray    # (m, 2) reference coordinates
    weights: np.ndarray   # (m,)
    exact_degree: int


def _tri_rule(points, weights_normalized, degree) -> QuadratureRule:
    # tabulated weights are normalized to 1; reference triangle area is 1/2
    return QuadratureRule(np.asarray(points, dtype=np.float64),
                          0.5 * np.asarray(weights_normalized, dtype=np.float64),
                          degree)


def _sym3(a, b):
    return [(b, b), (a, b), (b, a)]


_TRI_RULES = {
    1: _tri_rule([(1.0 / 3.0, 1.0 / 3.0)], [1.0], 1),
    2: _tri_rule(_sym3(2.0 / 3.0, 1.0 / 6.0), [1.0 / 3.0] * 3, 2),
    4: _tri_rule(
        _sym3(0.108103018168070, 0.445948490915965)
        + _sym3(0.816847572980459, 0.091576213509771),
        [0.223381589678011] * 3 + [0.109951743655322] * 3, 4),
    5: _tri_rule(
        [(1.0 / 3.0, 1.0 / 3.0)]
        + _sym3(0.059715871789770, 0.470142064105115)
        + _sym3(0.797426985353087, 0.101286507323456),
        [0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3, 5),
    6: _tri_rule(
        _sym3(0.501426509658179, 0.249286745170910)
        + _sym3(0.873821971016996, 0.063089014491502)
        + [(0.310352451033784, 0.636502499121399),
           (0.636502499121399, 0.310352451033784),
           (0.053145049844817, 0.636502499121399),
           (0.636502499121399, 0.053145049844817),
           (0.053145049844817, 0.310352451033784),
           (0.310352451033784, 0.053145049844817)],
        [0.116786275726379] * 3 + [0.050844906370207] * 3
        + [0.082851075618374] * 6, 6),
}

MAX_DEGREE = 6


def quadrature_for(kind, requested_degree: int) -> QuadratureRule:
    """Smallest stocked rule exact to at least the requested degree.

    Triangles carry symmetric Gauss rules of degree 1, 2, 4, 5, 6; quads get
    the n x n tensor Gauss-Legendre rule with 2n-1 >= requested_degree.
    """
    if not 1 <= requested_degree <= MAX_DEGREE:
        raise ValueError(
            f"unsupported quadrature degree {requested_degree}; "
            f"expected 1..{MAX_DEGREE}")
    element = reference_element(kind)
    if element.kind is ElementKind.P1_TRI:
        for deg in sorted(_TRI_RULES):
            if deg >= requested_degree:
                return _TRI_RULES[deg]
        raise AssertionError("unreachable: degree table covers 1..MAX_DEGREE")
    npts = (requested_degree + 2) // 2    # smallest n with 2n-1 >= degree
    nodes, weights = np.polynomial.legendre.leggauss(npts)
    pts = np.array([(a, b) for b in nodes for a in nodes])
    wts = np.array([wa * wb for wb in weights for wa in weights])
    return QuadratureRule(pts, wts, 2 * npts - 1)


def map_to_physical(cell: Cell, ref_point):
    """Map reference point(s) to the physical cell.

    Returns (physical point, Jacobian, detJ); batched input (m,2) yields
    (m,2), (m,2,2), (m,) so quads can report their per-point Jacobian
    (constant-diagonal here since cells are axis-aligned).
    Raises on nonpositive detJ.
    """
    pt = np.asarray(ref_point, dtype=np.float64)
    single = pt.ndim == 1
    pts = pt[None, :] if single else pt
    element = reference_element(cell.kind)
    vals, grads = shape_eval(element, pts)
    phys = vals @ cell.coords
    # J[k, d, r] = sum_a coords[a, d] * dN_a/dref_r
    jac = np.einsum("ad,kar->kdr", cell.coords, grads)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    if np.any(det <= 0.0):
        k = int(np.argmax(det <= 0.0))
        raise ValueError(
            f"degenerate cell (detJ={det[k]!r} at ref point {pts[k]})")
    if single:
        return phys[0], jac[0], float(det[0])
    return phys, jac, det


def physical_gradients(cell: Cell, ref_point):
    """Shape values and physical gradients at reference point(s), plus detJ.

    Gradients transform by the inverse-transpose Jacobian.
    Returns (values, grads, detJ) with batch shapes (m,n), (m,n,2), (m,).
    """
    pt = np.asarray(ref_point, dtype=np.float64)
    single = pt.ndim == 1
    pts = pt[None, :] if single else pt
    element = reference_element(cell.kind)
    vals, rgrads = shape_eval(element, pts)
    _, jac, det = map_to_physical(cell, pts)
    inv = np.empty_like(jac)
    inv[:, 0, 0] = jac[:, 1, 1]
    inv[:, 0, 1] = -jac[:, 0, 1]
    inv[:, 1, 0] = -jac[:, 1, 0]
    inv[:, 1, 1] = jac[:, 0, 0]
    inv /= det[:, None, None]
    # row vector of ref grads times J^-1 gives physical grads
    pgrads = np.einsum("kar,krd->kad", rgrads, inv)
    if single:
        return vals[0], pgrads[0], float(det[0])
    return vals, pgrads, det
