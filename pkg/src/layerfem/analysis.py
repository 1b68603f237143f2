"""Nodal interpolation, discrete norms, and the convergence-study harness.

The headline quantity is the supercloseness error |||u_I - u_h|||_SD between
the nodal interpolant of the exact solution and the SDFEM solution, reported
uniformly over an eps sweep:

    e^N = max_eps |||u_I - u_h|||_SD,
    p^N = log2(e^N / e^{2N})   (attached to the smaller N).

Norms are integrated with the same quadrature rules the assembly uses, which
is exact for the piecewise polynomial integrands involved.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assembly import (StabilizationConfig, _kind_tables, _REGIONS, _CHUNK,
                       TRI_QUAD_DEGREE, QUAD_QUAD_DEGREE, Problem, assemble,
                       delta_for, sample_coefficient)
from .linalg import SolveStats, gmres
from .mesh import MeshParams, ShishkinMesh, build_mesh
from .problems import benchmark_problem

EPS_SWEEP = (1e-6, 1e-8, 1e-10, 1e-12, 1e-14, 1e-16)


def default_delta_rule(N: int) -> StabilizationConfig:
    """Default stabilization: delta = 1/N on smooth cells, N^{-3/2} on the
    characteristic-layer strip, zero in the outflow layer and corners."""
    return StabilizationConfig(delta_s=1.0 / N, delta_x=0.0,
                               delta_y=N ** -1.5, delta_xy=0.0)


@dataclass(eq=False)
class FEFunction:
    """Piecewise-(bi)linear function given by one coefficient per mesh node."""
    mesh: ShishkinMesh
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=np.float64)
        if self.coeffs.shape != (self.mesh.n_nodes,):
            raise ValueError(
                f"expected {self.mesh.n_nodes} coefficients, "
                f"got {self.coeffs.shape}")


def interpolate(mesh: ShishkinMesh, exact) -> FEFunction:
    """Nodal interpolant of an exact solution on the mesh.

    Separable solutions (exposing X/Y factor methods) evaluate as an outer
    product over the two grids, feeding the exact stored complements to keep
    layer values meaningful at extreme eps.
    """
    if hasattr(exact, "X") and hasattr(exact, "Y"):
        xv = exact.X(mesh.grid_x.coords, omx=mesh.grid_x.complements)
        yv = exact.Y(mesh.grid_y.coords, omy=mesh.grid_y.complements)
        return FEFunction(mesh, np.outer(yv, xv).ravel())
    omx, omy = mesh.node_complements
    vals = sample_coefficient(exact.value, mesh.nodes[:, 0], mesh.nodes[:, 1],
                              omx, omy)
    return FEFunction(mesh, vals)


def _norm_sums(fe: FEFunction, b_fn=None, delta_lut=None):
    """Accumulated (|v|_1^2, ||v||^2, sum_K delta_K ||b v_x||_K^2).

    The stabilization sum is skipped (returned 0) unless b_fn and delta_lut
    are both given.  Accumulation is numpy-only and chunk-ordered, so results
    do not depend on the kernel backend.
    """
    mesh = fe.mesh
    d = fe.coeffs
    gxc, gyc = mesh.grid_x.coords, mesh.grid_y.coords
    gxo, gyo = mesh.grid_x.complements, mesh.grid_y.complements
    gxw, gyw = mesh.grid_x.widths, mesh.grid_y.widths
    tables = _kind_tables(TRI_QUAD_DEGREE, QUAD_QUAD_DEGREE)
    want_stab = b_fn is not None and delta_lut is not None

    grad_sq = 0.0
    mass_sq = 0.0
    stab_sq = 0.0
    for code in (0, 1, 2):
        sel = np.flatnonzero(mesh.cell_kind == code)
        if sel.size == 0:
            continue
        tab = tables[code]
        nv = tab["nv"]
        wq = tab["rule"].weights
        if code == 2:
            xi, eta = tab["xi"], tab["eta"]
            xa = np.array([-1.0, 1.0, 1.0, -1.0])
            ya = np.array([-1.0, -1.0, 1.0, 1.0])
            nsh = 0.25 * (1.0 + xa[:, None] * xi) * (1.0 + ya[:, None] * eta)
            gxt = 0.5 * xa[:, None] * (1.0 + ya[:, None] * eta)
            gyt = 0.5 * ya[:, None] * (1.0 + xa[:, None] * xi)
        else:
            nsh = tab["nsh"]
            sx, sy = tab["sx"], tab["sy"]
        for lo in range(0, sel.size, _CHUNK):
            chunk = sel[lo:lo + _CHUNK]
            gi = mesh.cell_grid[chunk, 0]
            gj = mesh.cell_grid[chunk, 1]
            hx = gxw[gi]
            hy = gyw[gj]
            dn = d[mesh.cell_verts[chunk, :nv]]
            if code == 2:
                wd = wq[None, :] * (0.25 * hx * hy)[:, None]
                vq = dn @ nsh
                vx = (dn @ gxt) / hx[:, None]
                vy = (dn @ gyt) / hy[:, None]
                grad_sq += float((wd * (vx ** 2 + vy ** 2)).sum())
            else:
                wd = wq[None, :] * (hx * hy)[:, None]
                vq = dn @ nsh
                vx = (dn @ sx) / hx
                vy = (dn @ sy) / hy
                grad_sq += float((0.5 * hx * hy * (vx ** 2 + vy ** 2)).sum())
                vx = vx[:, None]
            mass_sq += float((wd * vq ** 2).sum())
            if want_stab:
                delta = delta_lut[mesh.cell_region[chunk]]
                fx, fy = tab["fx"], tab["fy"]
                xq = gxc[gi][:, None] + fx[None, :] * hx[:, None]
                yq = gyc[gj][:, None] + fy[None, :] * hy[:, None]
                omxq = gxo[gi][:, None] - fx[None, :] * hx[:, None]
                omyq = gyo[gj][:, None] - fy[None, :] * hy[:, None]
                bq = sample_coefficient(b_fn, xq, yq, omxq, omyq)
                stab_sq += float((wd * delta[:, None] * (bq * vx) ** 2).sum())
    return grad_sq, mass_sq, stab_sq


def energy_norm_sq(fe: FEFunction, eps: float, mu0: float) -> float:
    """eps |v|_1^2 + mu0 ||v||_0^2."""
    grad_sq, mass_sq, _ = _norm_sums(fe)
    return eps * grad_sq + mu0 * mass_sq


def sd_norm_sq(fe: FEFunction, problem: Problem,
               config: StabilizationConfig) -> float:
    """Energy norm squared plus the streamline term sum_K delta_K ||b v_x||^2."""
    delta_lut = np.array([delta_for(config, tag) for tag in _REGIONS])
    grad_sq, mass_sq, stab_sq = _norm_sums(fe, b_fn=problem.b,
                                           delta_lut=delta_lut)
    return problem.eps * grad_sq + problem.mu0 * mass_sq + stab_sq


@dataclass(frozen=True)
class ErrorRecord:
    N: int
    eps: float
    e_eps: float
    e_sd: float
    stats: SolveStats


def _resolve_delta_rule(delta_rule, N: int) -> StabilizationConfig:
    if delta_rule is None:
        return default_delta_rule(N)
    if isinstance(delta_rule, StabilizationConfig):
        return delta_rule
    return delta_rule(N)


def solve_benchmark(N: int, eps: float, layout, delta_rule=None,
                    mu0: float = 2.0, backend: str | None = None,
                    tol: float = 1e-12, restart: int = 60,
                    max_outer: int = 200, precond: str = "ilu0"):
    """Assemble and solve one benchmark instance.

    Returns (mesh, problem, config, solution FEFunction over all nodes,
    SolveStats).
    """
    config = _resolve_delta_rule(delta_rule, N)
    problem = benchmark_problem(eps, mu0=mu0)
    mesh = build_mesh(MeshParams(N=N, eps=eps), layout)
    system = assemble(mesh, problem, config, backend=backend)
    x, stats = gmres(system.matrix, system.rhs, restart=restart, tol=tol,
                     max_outer=max_outer, precond=precond, backend=backend)
    return mesh, problem, config, FEFunction(mesh, system.expand(x)), stats


def supercloseness_error(N: int, eps: float, layout, delta_rule=None,
                         mu0: float = 2.0, backend: str | None = None,
                         tol: float = 1e-12, restart: int = 60,
                         max_outer: int = 200,
                         precond: str = "ilu0") -> ErrorRecord:
    """Supercloseness error |||u_I - u_h||| in both norms for one (N, eps).

    Solver non-convergence is not raised; it is reported through the record's
    stats so sweep drivers can mark the entry.
    """
    mesh, problem, config, uh, stats = solve_benchmark(
        N, eps, layout, delta_rule, mu0, backend, tol, restart, max_outer,
        precond)
    ui = interpolate(mesh, problem.exact)
    diff = FEFunction(mesh, ui.coeffs - uh.coeffs)
    return ErrorRecord(
        N=N, eps=eps,
        e_eps=math.sqrt(energy_norm_sq(diff, problem.eps, problem.mu0)),
        e_sd=math.sqrt(sd_norm_sq(diff, problem, config)),
        stats=stats)


def sweep_records(N: int, eps_list: Sequence[float], layout, delta_rule=None,
                  mu0s: Sequence[float] = (2.0,), backend: str | None = None,
                  tol: float = 1e-12, restart: int = 60, max_outer: int = 200,
                  precond: str = "ilu0") -> dict[float, list[ErrorRecord]]:
    """One solve per eps, error records for every requested mu0.

    The assembled system does not involve mu0 (it only weighs the norms and
    the admissibility bound), so a single solve serves all mu0 values; the
    stabilization weights are validated against the smallest, which has the
    tightest bound.
    """
    config = _resolve_delta_rule(delta_rule, N)
    out: dict[float, list[ErrorRecord]] = {m: [] for m in mu0s}
    for eps in eps_list:
        problem = benchmark_problem(eps, mu0=min(mu0s))
        mesh = build_mesh(MeshParams(N=N, eps=eps), layout)
        system = assemble(mesh, problem, config, backend=backend)
        x, stats = gmres(system.matrix, system.rhs, restart=restart, tol=tol,
                         max_outer=max_outer, precond=precond, backend=backend)
        ui = interpolate(mesh, problem.exact)
        diff = FEFunction(mesh, ui.coeffs - system.expand(x))
        grad_sq, mass_sq, stab_sq = _norm_sums(
            diff, b_fn=problem.b,
            delta_lut=np.array([delta_for(config, tag) for tag in _REGIONS]))
        for m in mu0s:
            e_eps = math.sqrt(eps * grad_sq + m * mass_sq)
            e_sd = math.sqrt(eps * grad_sq + m * mass_sq + stab_sq)
            out[m].append(ErrorRecord(N=N, eps=eps, e_eps=e_eps, e_sd=e_sd,
                                      stats=stats))
    return out


@dataclass
class TableRow:
    N: int
    e_eps: float
    rate_eps: float | None
    e_sd: float
    rate_sd: float | None
    incomplete: bool = False


@dataclass(eq=False)
class ConvergenceTable:
    layout: str
    mu0: float
    eps_list: tuple[float, ...]
    rows: list[TableRow]
    records: list[ErrorRecord]

    @property
    def complete(self) -> bool:
        return not any(r.incomplete for r in self.rows)


def _study_worker(task):
    (N, eps, layout, delta_rule, mu0, backend, tol, restart, max_outer,
     precond) = task
    return supercloseness_error(N, eps, layout, delta_rule=delta_rule,
                                mu0=mu0, backend=backend, tol=tol,
                                restart=restart, max_outer=max_outer,
                                precond=precond)


def run_study(N_list: Sequence[int], eps_list: Sequence[float] = EPS_SWEEP,
              layout="triangular", delta_rule=None, mu0: float = 2.0,
              jobs: int = 1, backend: str | None = None, tol: float = 1e-12,
              restart: int = 60, max_outer: int = 200,
              precond: str = "ilu0") -> ConvergenceTable:
    """Uniform-error convergence study over a doubling chain of N.

    Rates are attached only between consecutive rows with N doubling and both
    rows complete; a non-converged solve marks its row incomplete (its errors
    reduce over the converged entries only).  With jobs > 1 the (N, eps)
    solves fan out to worker processes; results are deterministic either way
    because reduction order is fixed by the task list.
    """
    N_list = [int(N) for N in N_list]
    eps_list = tuple(float(e) for e in eps_list)
    tasks = [(N, eps, str(layout), delta_rule, mu0, backend, tol, restart,
              max_outer, precond) for N in N_list for eps in eps_list]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_study_worker, tasks))
    else:
        records = [_study_worker(t) for t in tasks]

    rows: list[TableRow] = []
    per_N = [records[i * len(eps_list):(i + 1) * len(eps_list)]
             for i in range(len(N_list))]
    for N, recs in zip(N_list, per_N):
        good = [r for r in recs if r.stats.converged]
        incomplete = len(good) < len(recs)
        if good:
            e_eps = max(r.e_eps for r in good)
            e_sd = max(r.e_sd for r in good)
        else:
            e_eps = math.nan
            e_sd = math.nan
        rows.append(TableRow(N=N, e_eps=e_eps, rate_eps=None, e_sd=e_sd,
                             rate_sd=None, incomplete=incomplete))
    for i in range(len(rows) - 1):
        a, b = rows[i], rows[i + 1]
        if a.incomplete or b.incomplete or b.N != 2 * a.N:
            continue
        if a.e_eps > 0 and b.e_eps > 0:
            a.rate_eps = math.log2(a.e_eps / b.e_eps)
        if a.e_sd > 0 and b.e_sd > 0:
            a.rate_sd = math.log2(a.e_sd / b.e_sd)
    return ConvergenceTable(layout=str(layout), mu0=mu0, eps_list=eps_list,
                            rows=rows, records=records)


def fit_order(Ns: Sequence[int], errors: Sequence[float],
              ln_power: float = 0.0) -> float:
    """Least-squares order p in errors ~ C N^{-p} ln(N)^{ln_power}."""
    Ns = np.asarray(Ns, dtype=np.float64)
    errs = np.asarray(errors, dtype=np.float64)
    y = np.log(errs) - ln_power * np.log(np.log(Ns))
    slope = np.polyfit(np.log(Ns), y, 1)[0]
    return float(-slope)


def _fmt_float(v: float) -> str:
    return repr(float(v))


def table_to_csv(table: ConvergenceTable) -> str:
    """Uniform-error table; full-precision floats, blank missing rates."""
    lines = ["layout,N,e_eps,rate_eps,e_sd,rate_sd"]
    for r in table.rows:
        re_ = "" if r.rate_eps is None else _fmt_float(r.rate_eps)
        rs = "" if r.rate_sd is None else _fmt_float(r.rate_sd)
        lines.append(f"{table.layout},{r.N},{_fmt_float(r.e_eps)},{re_},"
                     f"{_fmt_float(r.e_sd)},{rs}")
    return "\n".join(lines) + "\n"


def records_to_csv(table: ConvergenceTable) -> str:
    """Per-(N, eps) solve records."""
    lines = ["layout,N,eps,e_eps,e_sd,iters,converged"]
    for r in table.records:
        lines.append(f"{table.layout},{r.N},{_fmt_float(r.eps)},"
                     f"{_fmt_float(r.e_eps)},{_fmt_float(r.e_sd)},"
                     f"{r.stats.iterations},{r.stats.converged}")
    return "\n".join(lines) + "\n"


def table_to_markdown(table: ConvergenceTable) -> str:
    head = (f"Layout: {table.layout}, mu0 = {table.mu0:g}, "
            f"eps sweep: {', '.join(f'{e:g}' for e in table.eps_list)}\n\n")
    lines = ["| N | e_eps | rate | e_sd | rate |",
             "| ---: | ---: | ---: | ---: | ---: |"]
    for r in table.rows:
        re_ = "--" if r.rate_eps is None else f"{r.rate_eps:.2f}"
        rs = "--" if r.rate_sd is None else f"{r.rate_sd:.2f}"
        mark = " *" if r.incomplete else ""
        lines.append(f"| {r.N}{mark} | {r.e_eps:.4e} | {re_} | "
                     f"{r.e_sd:.4e} | {rs} |")
    out = head + "\n".join(lines) + "\n"
    if not table.complete:
        out += "\n(* row affected by non-converged solves)\n"
    return out


def table_to_json_dict(table: ConvergenceTable) -> dict:
    return {
        "layout": table.layout,
        "mu0": table.mu0,
        "eps_list": list(table.eps_list),
        "rows": [{"N": r.N, "e_eps": r.e_eps, "rate_eps": r.rate_eps,
                  "e_sd": r.e_sd, "rate_sd": r.rate_sd,
                  "incomplete": r.incomplete} for r in table.rows],
        "records": [{"N": r.N, "eps": r.eps, "e_eps": r.e_eps,
                     "e_sd": r.e_sd, "iters": r.stats.iterations,
                     "restarts": r.stats.restarts,
                     "final_rel_residual": r.stats.final_rel_residual,
                     "converged": r.stats.converged} for r in table.records],
    }


def table_to_json(table: ConvergenceTable) -> str:
    return json.dumps(table_to_json_dict(table), indent=2) + "\n"


def plot_data_csv(table: ConvergenceTable) -> str:
    """e_sd against N with a N^{-3/2} ln(N)^{3/4} comparator anchored at the
    first complete row (log-log plot data)."""
    anchor = next((r for r in table.rows if not r.incomplete), None)

    def comparator(N: int) -> float:
        if anchor is None:
            return math.nan
        base = anchor.N ** -1.5 * math.log(anchor.N) ** 0.75
        return anchor.e_sd / base * (N ** -1.5 * math.log(N) ** 0.75)

    lines = ["N,e_sd,comparator"]
    for r in table.rows:
        lines.append(f"{r.N},{_fmt_float(r.e_sd)},"
                     f"{_fmt_float(comparator(r.N))}")
    return "\n".join(lines) + "\n"
