"""SDFEM assembly: local element forms and the batched global driver.

The discrete bilinear form on each cell K with stabilization weight delta is

    a_K(u, v) = int_K [ eps grad(u).grad(v)
                        + (b u_x + c u) (v + delta b v_x) ]

and the load is int_K f (v + delta b v_x).  Laplacians of piecewise-(bi)linear
trial functions vanish on axis-aligned cells, so no second-order term appears
in the stabilization.

``assemble`` runs a vectorized two-phase path: coefficients are sampled with
numpy at fraction-based quadrature points (exact complements keep 1-x and 1-y
meaningful inside boundary-layer bands far below machine resolution of the
coordinates themselves), then a backend kernel contracts the batched local
matrices.  ``local_matrix``/``local_rhs`` are the single-cell reference path
used by verification checks.
"""
from __future__ import annotations

import inspect
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from ._backend import get_kernels
from .fem_core import P1_TRI, Q1_QUAD, quadrature_for, shape_eval
from .linalg import SparseMatrix
from .mesh import Cell, CellKind, RegionTag, ShishkinMesh, _REGIONS

# default quadrature degrees for the production path; exact for the benchmark
# coefficients (b linear in x) on both cell types
TRI_QUAD_DEGREE = 4
QUAD_QUAD_DEGREE = 5

_CHUNK = 32768   # cells per batch; fixed so accumulation order never varies


@dataclass(frozen=True)
class Problem:
    """Coefficients of -eps Lap(u) + b u_x + c u = f on the unit square.

    mu0 is the coercivity constant: the data must satisfy b >= beta > 0 and
    c - b_x/2 >= mu0 pointwise.  validate() spot-checks both on random points.
    """
    b: Callable
    c: Callable
    f: Callable
    eps: float
    beta: float
    mu0: float
    b_x: Callable

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.mu0 > 0.0:
            raise ValueError(f"mu0 must be positive, got {self.mu0}")

    def validate(self, samples: int = 64, seed: int = 0,
                 tol: float = 1e-12) -> None:
        """Spot-check b >= beta and c - b_x/2 >= mu0 on random points."""
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.0, 1.0, samples)
        y = rng.uniform(0.0, 1.0, samples)
        bv = sample_coefficient(self.b, x, y, 1.0 - x, 1.0 - y)
        if np.any(bv < self.beta - tol):
            k = int(np.argmin(bv))
            raise ValueError(
                f"b({x[k]:.6g}, {y[k]:.6g}) = {bv[k]:.6g} is below beta={self.beta}")
        cv = sample_coefficient(self.c, x, y, 1.0 - x, 1.0 - y)
        bx = sample_coefficient(self.b_x, x, y, 1.0 - x, 1.0 - y)
        gap = cv - 0.5 * bx
        if np.any(gap < self.mu0 - tol):
            k = int(np.argmin(gap))
            raise ValueError(
                f"c - b_x/2 = {gap[k]:.6g} at ({x[k]:.6g}, {y[k]:.6g}) "
                f"is below mu0={self.mu0}")


@dataclass(frozen=True)
class StabilizationConfig:
    """Per-region stabilization weights delta_K (all nonnegative)."""
    delta_s: float = 0.0
    delta_x: float = 0.0
    delta_y: float = 0.0
    delta_xy: float = 0.0

    def __post_init__(self):
        for name in ("delta_s", "delta_x", "delta_y", "delta_xy"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


_REGION_FIELD = {
    RegionTag.SMOOTH: "delta_s",
    RegionTag.XLAYER: "delta_x",
    RegionTag.YLAYER: "delta_y",
    RegionTag.CORNER: "delta_xy",
}


def delta_for(config: StabilizationConfig, tag) -> float:
    """Stabilization weight for a region tag (RegionTag or its string value)."""
    tag = RegionTag(tag) if not isinstance(tag, RegionTag) else tag
    return getattr(config, _REGION_FIELD[tag])


@lru_cache(maxsize=256)
def _complement_kwargs(fn) -> tuple[bool, bool]:
    """Whether fn accepts exact-complement keywords omx / omy."""
    try:
        params = inspect.signature(fn).parameters
    except (TypeError, ValueError):
        return False, False
    var_kw = any(p.kind is inspect.Parameter.VAR_KEYWORD for p in params.values())
    return ("omx" in params or var_kw, "omy" in params or var_kw)


def sample_coefficient(fn, x, y, omx=None, omy=None) -> np.ndarray:
    """Evaluate a coefficient on arrays, passing complements when accepted.

    Scalar-valued coefficients broadcast to the shape of x.
    """
    use_omx, use_omy = _complement_kwargs(fn)
    kwargs = {}
    if use_omx and omx is not None:
        kwargs["omx"] = omx
    if use_omy and omy is not None:
        kwargs["omy"] = omy
    out = np.asarray(fn(x, y, **kwargs), dtype=np.float64)
    return np.ascontiguousarray(np.broadcast_to(out, np.shape(x)))


_TRI1_SX = np.array([-1.0, 1.0, 0.0])
_TRI1_SY = np.array([-1.0, 0.0, 1.0])
_TRI2_SX = np.array([-1.0, 0.0, 1.0])
_TRI2_SY = np.array([0.0, -1.0, 1.0])
_QUAD_XA = np.array([-1.0, 1.0, 1.0, -1.0])
_QUAD_YA = np.array([-1.0, -1.0, 1.0, 1.0])


def _local_frame(cell: Cell, rule):
    """Shape values, physical gradients, weights and coefficient coordinates.

    Geometry comes from the cell's stored widths and kind convention, never
    from coordinate differences, so single-cell integrals stay exact on layer
    cells whose absolute coordinates have collapsed to the same float.
    Returns (vals (q,n), grads (q,n,2), wd (q,), x, y, omx, omy).
    """
    pts = rule.points
    nq = pts.shape[0]
    xi, eta = pts[:, 0], pts[:, 1]
    if cell.kind is CellKind.QUAD:
        vals, _ = shape_eval(Q1_QUAD, pts)
        grads = np.empty((nq, 4, 2))
        grads[:, :, 0] = 0.5 * _QUAD_XA * (1.0 + eta[:, None] * _QUAD_YA) / cell.hx
        grads[:, :, 1] = 0.5 * _QUAD_YA * (1.0 + xi[:, None] * _QUAD_XA) / cell.hy
        wd = rule.weights * (0.25 * cell.hx * cell.hy)
        fx, fy = 0.5 * (1.0 + xi), 0.5 * (1.0 + eta)
    else:
        vals, _ = shape_eval(P1_TRI, pts)
        if cell.kind is CellKind.TRI1:
            sx, sy = _TRI1_SX, _TRI1_SY
            fx, fy = xi, eta
        else:
            sx, sy = _TRI2_SX, _TRI2_SY
            fx, fy = xi + eta, 1.0 - xi
        grads = np.empty((nq, 3, 2))
        grads[:, :, 0] = sx / cell.hx
        grads[:, :, 1] = sy / cell.hy
        wd = rule.weights * (cell.hx * cell.hy)
    x = cell.origin[0] + fx * cell.hx
    y = cell.origin[1] + fy * cell.hy
    omx = cell.origin_complement[0] - fx * cell.hx
    omy = cell.origin_complement[1] - fy * cell.hy
    return vals, grads, wd, x, y, omx, omy


def local_matrix(cell: Cell, problem: Problem, delta: float,
                 quad_degree: int | None = None) -> np.ndarray:
    """Single-cell SDFEM matrix; entry (r, s) couples test r with trial s."""
    if quad_degree is None:
        quad_degree = (QUAD_QUAD_DEGREE if cell.kind is CellKind.QUAD
                       else TRI_QUAD_DEGREE)
    rule = quadrature_for(cell.kind, quad_degree)
    vals, grads, wd, xq, yq, omx, omy = _local_frame(cell, rule)
    bq = sample_coefficient(problem.b, xq, yq, omx, omy)
    cq = sample_coefficient(problem.c, xq, yq, omx, omy)
    test = vals + delta * bq[:, None] * grads[:, :, 0]
    trial = bq[:, None] * grads[:, :, 0] + cq[:, None] * vals
    A = np.einsum("q,qr,qs->rs", wd, test, trial)
    A += problem.eps * np.einsum("q,qrd,qsd->rs", wd, grads, grads)
    return A


def local_rhs(cell: Cell, problem: Problem, delta: float,
              quad_degree: int | None = None) -> np.ndarray:
    """Single-cell SDFEM load vector int_K f (v + delta b v_x)."""
    if quad_degree is None:
        quad_degree = (QUAD_QUAD_DEGREE if cell.kind is CellKind.QUAD
                       else TRI_QUAD_DEGREE)
    rule = quadrature_for(cell.kind, quad_degree)
    vals, grads, wd, xq, yq, omx, omy = _local_frame(cell, rule)
    fq = sample_coefficient(problem.f, xq, yq, omx, omy)
    if not np.all(np.isfinite(fq)):
        k = int(np.flatnonzero(~np.isfinite(fq))[0])
        raise ValueError(
            f"f evaluated to {fq[k]!r} at quadrature point ({xq[k]!r}, {yq[k]!r})")
    bq = sample_coefficient(problem.b, xq, yq, omx, omy)
    test = vals + delta * bq[:, None] * grads[:, :, 0]
    return np.einsum("q,qr->r", wd * fq, test)


def validate_stabilization(mesh: ShishkinMesh, problem: Problem,
                           config: StabilizationConfig) -> None:
    """Reject weights violating delta_K <= mu0 / (2 sup_K |c|^2).

    sup|c| per region is estimated by sampling c at every cell vertex and
    centroid of that region; exact for constant or mildly varying c.
    """
    omx_n, omy_n = mesh.node_complements
    cn = np.abs(sample_coefficient(problem.c, mesh.nodes[:, 0],
                                   mesh.nodes[:, 1], omx_n, omy_n))
    verts = mesh.cell_verts.copy()
    tri = verts[:, 3] < 0
    verts[tri, 3] = verts[tri, 0]          # duplicate a vertex; max unaffected
    cell_sup = cn[verts].max(axis=1)

    gxc, gyc = mesh.grid_x.coords, mesh.grid_y.coords
    gxo, gyo = mesh.grid_x.complements, mesh.grid_y.complements
    gxw, gyw = mesh.grid_x.widths, mesh.grid_y.widths
    centroid_frac = {0: (1.0 / 3.0, 1.0 / 3.0), 1: (2.0 / 3.0, 2.0 / 3.0),
                     2: (0.5, 0.5)}
    for code, (fx, fy) in centroid_frac.items():
        sel = np.flatnonzero(mesh.cell_kind == code)
        if sel.size == 0:
            continue
        gi = mesh.cell_grid[sel, 0]
        gj = mesh.cell_grid[sel, 1]
        cx = gxc[gi] + fx * gxw[gi]
        cy = gyc[gj] + fy * gyw[gj]
        ocx = gxo[gi] - fx * gxw[gi]
        ocy = gyo[gj] - fy * gyw[gj]
        cc = np.abs(sample_coefficient(problem.c, cx, cy, ocx, ocy))
        cell_sup[sel] = np.maximum(cell_sup[sel], cc)

    sup = np.zeros(len(_REGIONS))
    np.maximum.at(sup, mesh.cell_region, cell_sup)
    present = np.bincount(mesh.cell_region, minlength=len(_REGIONS)) > 0
    for code, tag in enumerate(_REGIONS):
        if not present[code]:
            continue
        dv = delta_for(config, tag)
        if dv == 0.0:
            continue
        if sup[code] == 0.0:
            continue
        bound = problem.mu0 / (2.0 * sup[code] ** 2)
        if dv > bound * (1.0 + 1e-12):
            raise ValueError(
                f"{_REGION_FIELD[tag]}={dv:.6g} in region '{tag.value}' exceeds "
                f"the coercivity bound mu0/(2 sup|c|^2) = {bound:.6g}")


@dataclass(eq=False)
class DiscreteSystem:
    """Assembled linear system after Dirichlet elimination.

    node_to_dof maps node id to interior row index (-1 on the boundary);
    dof_to_node is its inverse; eliminated lists the boundary node ids.
    """
    matrix: SparseMatrix
    rhs: np.ndarray
    node_to_dof: np.ndarray
    dof_to_node: np.ndarray
    eliminated: np.ndarray

    @property
    def n_dofs(self) -> int:
        return self.matrix.n

    def expand(self, solution: np.ndarray) -> np.ndarray:
        """Scatter an interior-dof vector to all nodes (boundary zeros)."""
        if solution.shape != (self.n_dofs,):
            raise ValueError("solution length does not match dof count")
        full = np.zeros(self.node_to_dof.size)
        full[self.dof_to_node] = solution
        return full


def _tri_reference_tables(degree: int):
    rule = quadrature_for(P1_TRI, degree)
    pts = rule.points
    nsh = np.ascontiguousarray(
        np.stack([1.0 - pts[:, 0] - pts[:, 1], pts[:, 0], pts[:, 1]]))
    return rule, nsh


# per-kind fraction coordinates of the quadrature points within the parent
# rectangle, and the (constant) gradient stencils of the P1 triangles
def _kind_tables(degree_tri: int, degree_quad: int):
    rule_t, nsh = _tri_reference_tables(degree_tri)
    xi_t, eta_t = rule_t.points[:, 0], rule_t.points[:, 1]
    rule_q = quadrature_for(CellKind.QUAD, degree_quad)
    xi_q, eta_q = rule_q.points[:, 0].copy(), rule_q.points[:, 1].copy()
    return {
        0: dict(rule=rule_t, nsh=nsh, nv=3,
                fx=xi_t.copy(), fy=eta_t.copy(),
                sx=np.array([-1.0, 1.0, 0.0]), sy=np.array([-1.0, 0.0, 1.0])),
        1: dict(rule=rule_t, nsh=nsh, nv=3,
                fx=xi_t + eta_t, fy=1.0 - xi_t,
                sx=np.array([-1.0, 0.0, 1.0]), sy=np.array([0.0, -1.0, 1.0])),
        2: dict(rule=rule_q, nv=4, xi=xi_q, eta=eta_q,
                fx=0.5 * (1.0 + xi_q), fy=0.5 * (1.0 + eta_q)),
    }


def assemble(mesh: ShishkinMesh, problem: Problem, config: StabilizationConfig,
             backend: str | None = None) -> DiscreteSystem:
    """Assemble the SDFEM system with homogeneous Dirichlet elimination.

    Accumulation order is fixed (cell kind, then chunks of ascending cell
    index, then sorted duplicate reduction), so repeated runs on the same
    backend produce bitwise-identical matrices.
    """
    validate_stabilization(mesh, problem, config)
    kern = get_kernels(backend)
    nn = mesh.n_nodes

    interior = np.ones(nn, dtype=bool)
    interior[mesh.boundary_node_ids] = False
    node_to_dof = np.full(nn, -1, dtype=np.int64)
    dof_to_node = np.flatnonzero(interior).astype(np.int64)
    node_to_dof[dof_to_node] = np.arange(dof_to_node.size, dtype=np.int64)

    delta_lut = np.array([delta_for(config, tag) for tag in _REGIONS])
    gxc, gyc = mesh.grid_x.coords, mesh.grid_y.coords
    gxo, gyo = mesh.grid_x.complements, mesh.grid_y.complements
    gxw, gyw = mesh.grid_x.widths, mesh.grid_y.widths

    tables = _kind_tables(TRI_QUAD_DEGREE, QUAD_QUAD_DEGREE)
    rows_parts: list[np.ndarray] = []
    cols_parts: list[np.ndarray] = []
    vals_parts: list[np.ndarray] = []
    rhs_full = np.zeros(nn)

    for code in (0, 1, 2):
        sel = np.flatnonzero(mesh.cell_kind == code)
        if sel.size == 0:
            continue
        tab = tables[code]
        nv = tab["nv"]
        wq = tab["rule"].weights
        fx, fy = tab["fx"], tab["fy"]
        for lo in range(0, sel.size, _CHUNK):
            chunk = sel[lo:lo + _CHUNK]
            gi = mesh.cell_grid[chunk, 0]
            gj = mesh.cell_grid[chunk, 1]
            hx = gxw[gi]
            hy = gyw[gj]
            xq = gxc[gi][:, None] + fx[None, :] * hx[:, None]
            yq = gyc[gj][:, None] + fy[None, :] * hy[:, None]
            omxq = gxo[gi][:, None] - fx[None, :] * hx[:, None]
            omyq = gyo[gj][:, None] - fy[None, :] * hy[:, None]
            bq = sample_coefficient(problem.b, xq, yq, omxq, omyq)
            cq = sample_coefficient(problem.c, xq, yq, omxq, omyq)
            fq = sample_coefficient(problem.f, xq, yq, omxq, omyq)
            if not np.all(np.isfinite(fq)):
                k = int(np.flatnonzero(~np.isfinite(fq.ravel()))[0])
                raise ValueError(
                    f"f evaluated to {fq.ravel()[k]!r} at quadrature point "
                    f"({xq.ravel()[k]!r}, {yq.ravel()[k]!r})")
            delta = np.ascontiguousarray(delta_lut[mesh.cell_region[chunk]])
            if code == 2:
                avals, bvals = kern.quad_local(
                    hx, hy, delta, bq, cq, fq, wq,
                    tab["xi"], tab["eta"], problem.eps)
            else:
                avals, bvals = kern.tri_local(
                    hx, hy, delta, bq, cq, fq, wq,
                    tab["nsh"], tab["sx"], tab["sy"], problem.eps)
            verts = mesh.cell_verts[chunk, :nv]
            rhs_full += np.bincount(verts.ravel(),
                                    weights=bvals.ravel(), minlength=nn)
            nc = chunk.size
            rr = np.broadcast_to(verts[:, :, None], (nc, nv, nv)).ravel()
            cc = np.broadcast_to(verts[:, None, :], (nc, nv, nv)).ravel()
            keep = interior[rr] & interior[cc]
            rows_parts.append(node_to_dof[rr[keep]])
            cols_parts.append(node_to_dof[cc[keep]])
            vals_parts.append(avals.ravel()[keep])

    ndof = dof_to_node.size
    matrix = SparseMatrix.from_coo(
        ndof,
        np.concatenate(rows_parts) if rows_parts else np.empty(0, np.int64),
        np.concatenate(cols_parts) if cols_parts else np.empty(0, np.int64),
        np.concatenate(vals_parts) if vals_parts else np.empty(0))
    return DiscreteSystem(
        matrix=matrix,
        rhs=rhs_full[dof_to_node],
        node_to_dof=node_to_dof,
        dof_to_node=dof_to_node,
        eliminated=np.asarray(mesh.boundary_node_ids, dtype=np.int64),
    )


@dataclass(frozen=True)
class CoercivityReport:
    trials: int
    min_ratio: float
    threshold: float
    passed: bool


def coercivity_check(mesh: ShishkinMesh, problem: Problem,
                     config: StabilizationConfig, trials: int = 100,
                     seed: int = 0, backend: str | None = None) -> CoercivityReport:
    """Verify a(v, v) >= 1/2 ||v||_SD^2 on random interior test functions."""
    from .analysis import FEFunction, sd_norm_sq
    from .linalg import spmv

    system = assemble(mesh, problem, config, backend=backend)
    rng = np.random.default_rng(seed)
    threshold = 0.5 - 1e-10
    min_ratio = np.inf
    for _ in range(trials):
        v = rng.standard_normal(system.n_dofs)
        quad_form = float(v @ spmv(system.matrix, v, backend=backend))
        fe = FEFunction(mesh, system.expand(v))
        norm_sq = sd_norm_sq(fe, problem, config)
        min_ratio = min(min_ratio, quad_form / norm_sq)
    return CoercivityReport(trials=trials, min_ratio=float(min_ratio),
                            threshold=threshold,
                            passed=bool(min_ratio >= threshold))


def write_matrix_market(path, A: SparseMatrix) -> None:
    """Dump a SparseMatrix in MatrixMarket coordinate format (1-based)."""
    lines = ["%%MatrixMarket matrix coordinate real general",
             f"{A.n} {A.n} {A.nnz}"]
    for i in range(A.n):
        for p in range(A.indptr[i], A.indptr[i + 1]):
            lines.append(f"{i + 1} {A.indices[p] + 1} {A.data[p]:.17g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
