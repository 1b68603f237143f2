"""Shishkin tensor-product meshes with triangular, rectangular and hybrid layouts.

The grids are piecewise uniform with transition points lambda_x = min(1/2,
rho*(eps/beta)*ln N) and lambda_y = min(1/4, rho*sqrt(eps)*ln N).  For eps
near 1e-16 the fine x-band width 2*lambda_x/N drops below the float64 ulp at
1.0, so coordinates alone cannot represent the mesh.  Each Grid1D therefore
carries three mutually consistent representations:

* ``coords``      - the usual coordinates (may collapse at extreme eps),
* ``complements`` - exact values of 1-coordinate, computed from the band
                    formulas (never by subtraction from a collapsed coord),
* ``widths``      - per-interval widths from the band formulas.

Downstream code evaluates layer functions from the complements and geometry
from the widths, which keeps the discretization exact down to eps = 1e-16.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Layout(Enum):
    TRIANGULAR = "triangular"
    RECTANGULAR = "rectangular"
    HYBRID1 = "hybrid1"      # quads in the x-layer region, triangles elsewhere
    HYBRID2 = "hybrid2"      # triangles in the x-layer region, quads elsewhere


class RegionTag(Enum):
    """Subdomain of the layer dissection a cell belongs to."""
    SMOOTH = "s"
    XLAYER = "x"
    YLAYER = "y"
    CORNER = "xy"


class CellKind(Enum):
    TRI1 = "tri1"   # vertices (x_i,y_j), (x_{i+1},y_j), (x_i,y_{j+1})
    TRI2 = "tri2"   # vertices (x_i,y_{j+1}), (x_{i+1},y_j), (x_{i+1},y_{j+1})
    QUAD = "quad"   # counterclockwise from (x_i,y_j)


# integer codes used in the struct-of-arrays cell storage
_KIND_CODES = {CellKind.TRI1: 0, CellKind.TRI2: 1, CellKind.QUAD: 2}
_KINDS = (CellKind.TRI1, CellKind.TRI2, CellKind.QUAD)
_REGIONS = (RegionTag.SMOOTH, RegionTag.XLAYER, RegionTag.YLAYER, RegionTag.CORNER)


@dataclass(frozen=True)
class MeshParams:
    """Mesh family parameters: intervals per direction N, perturbation eps,
    convection lower bound beta, transition constant rho."""
    N: int
    eps: float
    beta: float = 1.0
    rho: float = 2.5

    def __post_init__(self):
        if self.N < 6 or self.N % 6 != 0:
            raise ValueError(f"N must be divisible by 6 and >= 6, got {self.N}")
        if not self.eps > 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.rho > 0.0:
            raise ValueError(f"rho must be positive, got {self.rho}")

    @property
    def assumption_violated(self) -> bool:
        """True when eps > min(1/N, ln(N)^-6), i.e. the layer-resolving
        regime the error analysis assumes does not hold."""
        ln = math.log(self.N)
        return self.eps > min(1.0 / self.N, ln ** -6)


@dataclass(frozen=True)
class TransitionParams:
    lambda_x: float
    lambda_y: float
    capped_x: bool
    capped_y: bool


def compute_transition_params(params: MeshParams) -> TransitionParams:
    """Transition points lambda_x = min(1/2, rho*(eps/beta)*ln N) and
    lambda_y = min(1/4, rho*sqrt(eps)*ln N)."""
    ln = math.log(params.N)
    raw_x = params.rho * (params.eps / params.beta) * ln
    raw_y = params.rho * math.sqrt(params.eps) * ln
    return TransitionParams(
        lambda_x=min(0.5, raw_x),
        lambda_y=min(0.25, raw_y),
        capped_x=raw_x >= 0.5,
        capped_y=raw_y >= 0.25,
    )


@dataclass(frozen=True, eq=False)
class Grid1D:
    """One tensor direction of the mesh; see module docstring for the
    three-representation scheme."""
    coords: np.ndarray        # (N+1,)
    complements: np.ndarray   # (N+1,) exact 1 - coords
    widths: np.ndarray        # (N,) formula interval widths
    band_bounds: tuple[int, ...]    # band boundary indices, e.g. (0, N/2, N)
    band_widths: tuple[float, ...]  # uniform width of each band

    @property
    def n(self) -> int:
        return self.coords.size - 1


def build_grid(params: MeshParams,
               transition: TransitionParams) -> tuple[Grid1D, Grid1D]:
    """The 1D Shishkin grids: x has N/2 coarse then N/2 fine intervals with
    the transition at 1-lambda_x; y has fine/coarse/fine thirds with
    transitions at lambda_y and 1-lambda_y.

    Transition coordinates are hit exactly: the branch formulas evaluate to
    a 1.0 factor there, and the middle y band interpolates between the
    stored floats lambda_y and 1-lambda_y.
    """
    N = params.N
    lx = transition.lambda_x
    ly = transition.lambda_y
    omlx = 1.0 - lx
    omly = 1.0 - ly

    i = np.arange(N + 1)
    coarse = i <= N // 2
    tx = 2.0 * i / N                 # equals 1.0 exactly at i = N/2
    ux = 2.0 * (N - i) / N
    x = np.where(coarse, omlx * tx, 1.0 - lx * ux)
    omx = np.where(coarse, (1.0 - tx) + lx * tx, lx * ux)
    wx = np.where(np.arange(N) < N // 2, 2.0 * omlx / N, 2.0 * lx / N)
    grid_x = Grid1D(x, omx, wx, (0, N // 2, N),
                    (2.0 * omlx / N, 2.0 * lx / N))

    j = np.arange(N + 1)
    n3 = N // 3
    ty = 3.0 * j / N                 # equals 1.0 exactly at j = N/3
    uy = 3.0 * (N - j) / N
    th = 3.0 * j / N - 1.0           # middle-band parameter, 1.0 at j = 2N/3
    y = np.where(j <= n3, ly * ty,
                 np.where(j <= 2 * n3, (1.0 - th) * ly + th * omly,
                          1.0 - ly * uy))
    omy = np.where(j <= n3, 1.0 - ly * ty,
                   np.where(j <= 2 * n3, th * ly + (1.0 - th) * omly,
                            ly * uy))
    hy = 3.0 * ly / N
    Hy = 3.0 * (1.0 - 2.0 * ly) / N
    jj = np.arange(N)
    wy = np.where((jj >= n3) & (jj < 2 * n3), Hy, hy)
    grid_y = Grid1D(y, omy, wy, (0, n3, 2 * n3, N), (hy, Hy, hy))
    return grid_x, grid_y


@dataclass(frozen=True, eq=False)
class Cell:
    """Single-cell view carrying its own geometry so element-level code can
    work without a mesh handle."""
    kind: CellKind
    vertex_ids: tuple[int, ...]
    region: RegionTag
    grid_cell: tuple[int, int]
    coords: np.ndarray                       # (n_vertices, 2)
    hx: float                                # parent rectangle widths
    hy: float
    origin: tuple[float, float]              # (x_i, y_j)
    origin_complement: tuple[float, float]   # exact (1-x_i, 1-y_j)


def cell_from_coords(kind, coords, region: RegionTag = RegionTag.SMOOTH,
                     vertex_ids=None) -> Cell:
    """Standalone Cell from explicit vertex coordinates.

    Intended for element-level work on hand-built cells; hx/hy are the
    bounding-box widths and the complement origin assumes the unit square.
    """
    kind = CellKind(kind) if not isinstance(kind, CellKind) else kind
    coords = np.asarray(coords, dtype=np.float64)
    nv = 4 if kind is CellKind.QUAD else 3
    if coords.shape != (nv, 2):
        raise ValueError(f"expected {nv} vertices for {kind.value}, "
                         f"got array of shape {coords.shape}")
    x0 = float(coords[:, 0].min())
    y0 = float(coords[:, 1].min())
    if vertex_ids is None:
        vertex_ids = tuple(range(nv))
    return Cell(
        kind=kind,
        vertex_ids=tuple(int(v) for v in vertex_ids),
        region=region,
        grid_cell=(0, 0),
        coords=coords,
        hx=float(coords[:, 0].max()) - x0,
        hy=float(coords[:, 1].max()) - y0,
        origin=(x0, y0),
        origin_complement=(1.0 - x0, 1.0 - y0),
    )


class _CellSeq:
    """Lazy sequence of Cell views over the struct-of-arrays storage."""

    def __init__(self, mesh: "ShishkinMesh"):
        self._mesh = mesh

    def __len__(self) -> int:
        return self._mesh.n_cells

    def __getitem__(self, idx: int) -> Cell:
        return self._mesh.cell(idx)

    def __iter__(self):
        for idx in range(len(self)):
            yield self._mesh.cell(idx)


@dataclass(eq=False)
class ShishkinMesh:
    """Constructed mesh; treat as immutable after build_mesh returns.

    Cell data lives in struct-of-arrays form (cell_kind/cell_verts/
    cell_region/cell_grid) for vectorized assembly; the ``cells`` sequence
    materializes Cell views on demand.
    """
    params: MeshParams
    transition: TransitionParams
    layout: Layout
    grid_x: Grid1D
    grid_y: Grid1D
    nodes: np.ndarray              # (n_nodes, 2) float64
    boundary_node_ids: np.ndarray  # sorted int64
    cell_kind: np.ndarray          # (n_cells,) int8 codes 0=tri1 1=tri2 2=quad
    cell_verts: np.ndarray         # (n_cells, 4) int64, col 3 = -1 for triangles
    cell_region: np.ndarray        # (n_cells,) int8 codes into _REGIONS
    cell_grid: np.ndarray          # (n_cells, 2) int32 parent rectangle (i, j)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cell_kind.size

    @property
    def cells(self) -> _CellSeq:
        return _CellSeq(self)

    @property
    def node_complements(self) -> tuple[np.ndarray, np.ndarray]:
        """Exact (1-x, 1-y) per node, from the grid complements."""
        N = self.params.N
        omx = np.tile(self.grid_x.complements, N + 1)
        omy = np.repeat(self.grid_y.complements, N + 1)
        return omx, omy

    def cell(self, idx: int) -> Cell:
        kind = _KINDS[self.cell_kind[idx]]
        nv = 4 if kind is CellKind.QUAD else 3
        vids = tuple(int(v) for v in self.cell_verts[idx, :nv])
        gi, gj = (int(v) for v in self.cell_grid[idx])
        return Cell(
            kind=kind,
            vertex_ids=vids,
            region=_REGIONS[self.cell_region[idx]],
            grid_cell=(gi, gj),
            coords=self.nodes[list(vids)],
            hx=float(self.grid_x.widths[gi]),
            hy=float(self.grid_y.widths[gj]),
            origin=(float(self.grid_x.coords[gi]), float(self.grid_y.coords[gj])),
            origin_complement=(float(self.grid_x.complements[gi]),
                               float(self.grid_y.complements[gj])),
        )

    def cell_areas(self) -> np.ndarray:
        """Cell areas from the formula widths (robust at extreme eps)."""
        rect = (self.grid_x.widths[self.cell_grid[:, 0]]
                * self.grid_y.widths[self.cell_grid[:, 1]])
        return np.where(self.cell_kind == _KIND_CODES[CellKind.QUAD],
                        rect, 0.5 * rect)

    def to_json_dict(self) -> dict:
        cells = []
        for idx in range(self.n_cells):
            kind = _KINDS[self.cell_kind[idx]]
            nv = 4 if kind is CellKind.QUAD else 3
            cells.append({
                "kind": kind.value,
                "v": [int(v) for v in self.cell_verts[idx, :nv]],
                "region": _REGIONS[self.cell_region[idx]].value,
            })
        return {
            "nodes": [[float(x), float(y)] for x, y in self.nodes],
            "cells": cells,
            "boundary": [int(b) for b in self.boundary_node_ids],
            "meta": {
                "N": self.params.N,
                "eps": self.params.eps,
                "beta": self.params.beta,
                "rho": self.params.rho,
                "lambda_x": self.transition.lambda_x,
                "lambda_y": self.transition.lambda_y,
                "layout": self.layout.value,
            },
        }

    def save_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json_dict(), fh)


def _region_codes(N: int) -> np.ndarray:
    """Region code per grid rectangle, indexed [i, j]."""
    ii, jj = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    right = ii >= N // 2
    mid = (jj >= N // 3) & (jj < 2 * (N // 3))
    smooth, xlayer, ylayer, corner = range(4)
    return np.where(right, np.where(mid, xlayer, corner),
                    np.where(mid, smooth, ylayer)).astype(np.int8)


def build_mesh(params: MeshParams, layout: Layout | str) -> ShishkinMesh:
    """Construct the requested cell layout on the Shishkin grid.

    Triangular splits every grid rectangle along the (x_{i+1},y_j) to
    (x_i,y_{j+1}) diagonal; rectangular keeps the rectangles; hybrid1 places
    quads exactly in the x-layer region, hybrid2 places triangles there.
    Cells are ordered rectangle-major (j outer, i inner), tri1 before tri2.
    """
    if isinstance(layout, str):
        layout = Layout(layout)
    transition = compute_transition_params(params)
    grid_x, grid_y = build_grid(params, transition)
    N = params.N

    nodes = np.column_stack([
        np.tile(grid_x.coords, N + 1),
        np.repeat(grid_y.coords, N + 1),
    ])
    idx = np.arange((N + 1) ** 2)
    ni = idx % (N + 1)
    nj = idx // (N + 1)
    boundary = idx[(ni == 0) | (ni == N) | (nj == 0) | (nj == N)]

    region = _region_codes(N)
    # rectangles in cell order: j outer, i inner
    ri = np.tile(np.arange(N), N)
    rj = np.repeat(np.arange(N), N)
    rect_region = region[ri, rj]
    if layout is Layout.TRIANGULAR:
        quad_rect = np.zeros(N * N, dtype=bool)
    elif layout is Layout.RECTANGULAR:
        quad_rect = np.ones(N * N, dtype=bool)
    elif layout is Layout.HYBRID1:
        quad_rect = rect_region == 1
    else:
        quad_rect = rect_region != 1

    counts = np.where(quad_rect, 1, 2)
    cell_rect = np.repeat(np.arange(N * N), counts)
    first = np.ones(cell_rect.size, dtype=bool)
    first[1:] = cell_rect[1:] != cell_rect[:-1]
    kq, k1, k2 = _KIND_CODES[CellKind.QUAD], 0, 1
    kind = np.where(quad_rect[cell_rect], kq, np.where(first, k1, k2)).astype(np.int8)

    base = (rj * (N + 1) + ri)[cell_rect].astype(np.int64)
    v0 = base + np.where(kind == 1, N + 1, 0)
    v1 = base + 1
    v2 = base + np.where(kind == 0, N + 1, N + 2)
    v3 = np.where(kind == kq, base + N + 1, -1)
    cell_verts = np.column_stack([v0, v1, v2, v3])

    return ShishkinMesh(
        params=params,
        transition=transition,
        layout=layout,
        grid_x=grid_x,
        grid_y=grid_y,
        nodes=nodes,
        boundary_node_ids=boundary.astype(np.int64),
        cell_kind=kind,
        cell_verts=cell_verts,
        cell_region=rect_region[cell_rect].astype(np.int8),
        cell_grid=np.column_stack([ri, rj])[cell_rect].astype(np.int32),
    )


@dataclass
class ValidationReport:
    ok: bool
    failures: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    eps_assumption_violated: bool = False


def _check_grid(name: str, grid: Grid1D, report: ValidationReport) -> None:
    c = grid.coords
    if c[0] != 0.0 or c[-1] != 1.0:
        report.failures.append(f"{name}-grid endpoints are not 0 and 1")
    if np.any(grid.widths <= 0.0):
        report.failures.append(f"{name}-grid has a nonpositive formula width")
    comp = grid.complements
    coords_increasing = bool(np.all(np.diff(c) > 0.0))
    comp_decreasing = bool(np.all(np.diff(comp) < 0.0))
    if not coords_increasing:
        if comp_decreasing:
            report.warnings.append(
                f"{name}-grid float coordinates collapse in the fine band "
                "(interval width below float64 resolution); exact "
                "complements remain strictly monotone")
        else:
            report.failures.append(f"{name}-grid is not strictly increasing")


def validate_mesh(mesh: ShishkinMesh) -> ValidationReport:
    """Structural checks: grid monotonicity, exact transition coordinates,
    edge conformity, positive cell areas, unit total area, region bookkeeping.
    Failures are collected, not raised."""
    report = ValidationReport(ok=True)
    params = mesh.params
    N = params.N
    tr = mesh.transition

    _check_grid("x", mesh.grid_x, report)
    _check_grid("y", mesh.grid_y, report)

    # transition coordinates must be bit-exact against the stored lambdas
    if mesh.grid_x.coords[N // 2] != 1.0 - tr.lambda_x:
        report.failures.append("x-grid transition coordinate != 1-lambda_x")
    if mesh.grid_y.coords[N // 3] != tr.lambda_y:
        report.failures.append("y-grid transition coordinate != lambda_y")
    if mesh.grid_y.coords[2 * (N // 3)] != 1.0 - tr.lambda_y:
        report.failures.append("y-grid transition coordinate != 1-lambda_y")

    if mesh.n_nodes != (N + 1) ** 2:
        report.failures.append(
            f"node count {mesh.n_nodes} != (N+1)^2 = {(N + 1) ** 2}")

    n_quads = int(np.sum(mesh.cell_kind == 2))
    n_tris = mesh.n_cells - n_quads
    expected = {
        Layout.TRIANGULAR: (0, 2 * N * N),
        Layout.RECTANGULAR: (N * N, 0),
    }
    if mesh.layout in expected and (n_quads, n_tris) != expected[mesh.layout]:
        report.failures.append(
            f"cell counts (quads={n_quads}, tris={n_tris}) wrong for "
            f"{mesh.layout.value}")
    if n_quads + (n_tris // 2) != N * N or n_tris % 2 != 0:
        report.failures.append("cells do not tile the grid rectangles")

    # edge conformity: interior edges shared by exactly 2 cells, boundary by 1
    edge_count: dict[tuple[int, int], int] = {}
    boundary_set = set(int(b) for b in mesh.boundary_node_ids)
    for idx in range(mesh.n_cells):
        nv = 4 if mesh.cell_kind[idx] == 2 else 3
        vs = mesh.cell_verts[idx, :nv]
        for a in range(nv):
            e = (int(vs[a]), int(vs[(a + 1) % nv]))
            e = (min(e), max(e))
            edge_count[e] = edge_count.get(e, 0) + 1
    for (a, b), cnt in edge_count.items():
        if cnt > 2:
            report.failures.append(f"edge ({a},{b}) shared by {cnt} cells")
        elif cnt == 1 and not (a in boundary_set and b in boundary_set):
            report.failures.append(f"interior edge ({a},{b}) belongs to one cell")

    # orientation via shoelace where float coordinates can represent the cell
    wx = mesh.grid_x.widths[mesh.cell_grid[:, 0]]
    wy = mesh.grid_y.widths[mesh.cell_grid[:, 1]]
    dx = np.diff(mesh.grid_x.coords)[mesh.cell_grid[:, 0]]
    dy = np.diff(mesh.grid_y.coords)[mesh.cell_grid[:, 1]]
    representable = (dx > 0.0) & (dy > 0.0)
    skipped = int(np.sum(~representable))
    if skipped:
        report.warnings.append(
            f"orientation check skipped for {skipped} cells with collapsed "
            "float coordinates")
    signed = np.empty(mesh.n_cells)
    for idx in range(mesh.n_cells):
        nv = 4 if mesh.cell_kind[idx] == 2 else 3
        p = mesh.nodes[mesh.cell_verts[idx, :nv]]
        # shoelace on local offsets: products of absolute coordinates near 1
        # would cancel below ulp(1) on thin cells and scramble the sign
        p = p - p[0]
        x, y = p[:, 0], p[:, 1]
        signed[idx] = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    bad = np.where(representable & (signed <= 0.0))[0]
    for idx in bad[:10]:
        report.failures.append(f"cell {int(idx)} has nonpositive signed area")
    if bad.size > 10:
        report.failures.append(f"... and {bad.size - 10} more nonpositive areas")

    areas = mesh.cell_areas()
    total = float(np.sum(areas))
    if abs(total - 1.0) > 1e-12:
        report.failures.append(f"total area {total!r} differs from 1 by > 1e-12")

    region_area = {}
    region_cells = {}
    for code, tag in enumerate(_REGIONS):
        sel = mesh.cell_region == code
        region_area[tag.value] = float(np.sum(areas[sel]))
        region_cells[tag.value] = int(np.sum(sel))
    report.stats.update({
        "n_nodes": mesh.n_nodes,
        "n_cells": mesh.n_cells,
        "n_quads": n_quads,
        "n_triangles": n_tris,
        "total_area": total,
        "region_area": region_area,
        "region_cells": region_cells,
        "lambda_x": tr.lambda_x,
        "lambda_y": tr.lambda_y,
        "capped_x": tr.capped_x,
        "capped_y": tr.capped_y,
    })

    if params.assumption_violated:
        report.eps_assumption_violated = True
        report.warnings.append(
            "epsilon assumption violated: eps > min(1/N, ln(N)^-6); the mesh "
            "degenerates toward uniform and layer resolution is not guaranteed")

    report.ok = not report.failures
    return report
