"""Acceptance gate for the benchmark convergence study.

Each test covers one release criterion and prints a single PASS/FAIL line
with the measured quantities. The default chain runs N = 12..384 (about a
minute); set LAYERFEM_ACCEPTANCE_FAST=1 to stop at N = 192 while iterating,
which skips the rate-law discrimination that needs the last tier.
"""
import math
import os
import time

import numpy as np
import pytest

from layerfem._checks import run_all_checks
from layerfem.analysis import (EPS_SWEEP, default_delta_rule, fit_order,
                               interpolate, sweep_records)
from layerfem.assembly import assemble
from layerfem.linalg import gmres, spmv
from layerfem.mesh import CellKind, MeshParams, build_mesh
from layerfem.problems import benchmark_problem, exact_u

FAST = os.environ.get("LAYERFEM_ACCEPTANCE_FAST") == "1"
CHAIN = (12, 24, 48, 96, 192) + (() if FAST else (384,))
MU0S = (1.0, 2.0)
LAYOUTS = ("triangular", "rectangular", "hybrid1", "hybrid2")
TOL = 1e-12

# reference convergence histories for the benchmark problem (sweep maxima
# of e_sd and the rates between consecutive N)
TRI_SD = (6.019e-2, 2.729e-2, 1.134e-2, 4.511e-3, 1.758e-3, 6.788e-4)
TRI_RATES = (1.14, 1.27, 1.33, 1.36, 1.37)
RECT_SD = (4.242e-2, 1.789e-2, 6.749e-3, 2.362e-3, 7.854e-4, 2.517e-4)
RECT_RATES = (1.25, 1.41, 1.51, 1.59, 1.64)


@pytest.fixture(scope="session")
def sweep_data():
    data = {}
    for layout in LAYOUTS:
        t0 = time.perf_counter()
        per_N = {}
        elapsed_192 = math.inf
        for N in CHAIN:
            per_N[N] = sweep_records(N, EPS_SWEEP, layout, mu0s=MU0S)
            if N == 192:
                elapsed_192 = time.perf_counter() - t0
        data[layout] = {"recs": per_N, "elapsed_192": elapsed_192}
    return data


def _history(data, layout, mu0):
    recs = data[layout]["recs"]
    return [max(r.e_sd for r in recs[N][mu0]) for N in CHAIN]


def _rates(errors):
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


def _report(ok, label, detail):
    print(f"{'PASS' if ok else 'FAIL'} {label}: {detail}")
    assert ok, f"{label}: {detail}"


def _history_criterion(data, layout, ref_sd, ref_rates):
    """Rates within 0.05 and errors within x1.5 for at least one mu0."""
    ref_sd = ref_sd[:len(CHAIN)]
    ref_rates = ref_rates[:len(CHAIN) - 1]
    best = None
    for mu0 in MU0S:
        e = _history(data, layout, mu0)
        r = _rates(e)
        rate_dev = max(abs(a - b) for a, b in zip(r, ref_rates))
        abs_ratio = max(max(v / ref, ref / v) for v, ref in zip(e, ref_sd))
        ok = rate_dev <= 0.05 and abs_ratio <= 1.5
        if best is None or ok:
            best = (ok, mu0, e, r, rate_dev, abs_ratio)
        if ok:
            break
    ok, mu0, e, r, rate_dev, abs_ratio = best
    detail = (f"mu0={mu0:g} rates {', '.join(f'{v:.2f}' for v in r)} "
              f"(max dev {rate_dev:.3f} <= 0.05), error ratio vs reference "
              f"<= {abs_ratio:.3f} (<= 1.5)")
    return ok, detail


def test_criterion_1_triangular_history(sweep_data):
    ok, detail = _history_criterion(sweep_data, "triangular",
                                    TRI_SD, TRI_RATES)
    elapsed = sweep_data["triangular"]["elapsed_192"]
    ok = ok and elapsed <= 1200.0
    _report(ok, "criterion 1 (triangular history)",
            f"{detail}; chain through N=192 in {elapsed:.0f}s (<= 1200s)")


def test_criterion_2_rectangular_history(sweep_data):
    ok, detail = _history_criterion(sweep_data, "rectangular",
                                    RECT_SD, RECT_RATES)
    elapsed = sweep_data["rectangular"]["elapsed_192"]
    ok = ok and elapsed <= 1200.0
    _report(ok, "criterion 2 (rectangular history)",
            f"{detail}; chain through N=192 in {elapsed:.0f}s (<= 1200s)")


def test_criterion_3_hybrids_track_parents(sweep_data):
    worst = 0.0
    for hybrid, parent in (("hybrid1", "rectangular"),
                           ("hybrid2", "triangular")):
        eh = _history(sweep_data, hybrid, 2.0)
        ep = _history(sweep_data, parent, 2.0)
        worst = max(worst, max(abs(a / b - 1.0) for a, b in zip(eh, ep)))
    _report(worst <= 0.05, "criterion 3 (hybrid/parent agreement)",
            f"max per-N deviation {worst:.4f} (<= 0.05)")


def test_criterion_4_fitted_orders(sweep_data):
    if FAST:
        pytest.skip("rate-law discrimination needs the N=384 tier")
    fits = {layout: fit_order(CHAIN[-3:], _history(sweep_data, layout,
                                                   2.0)[-3:])
            for layout in LAYOUTS}
    ok = (1.30 <= fits["triangular"] <= 1.55
          and 1.30 <= fits["hybrid2"] <= 1.55
          and fits["rectangular"] >= 1.55 and fits["hybrid1"] >= 1.55)
    _report(ok, "criterion 4 (fitted orders, last two doublings)",
            "; ".join(f"{k} {v:.3f}" for k, v in fits.items())
            + " (tri/hyb2 in [1.30, 1.55], rect/hyb1 >= 1.55)")


def test_criterion_5_sweep_robustness(sweep_data):
    worst = 0.0
    for layout in LAYOUTS:
        for N in CHAIN:
            for mu0 in MU0S:
                e = [r.e_sd for r in sweep_data[layout]["recs"][N][mu0]]
                worst = max(worst, max(e) / min(e))
    _report(worst <= 1.5, "criterion 5 (uniformity in eps)",
            f"max over layouts/N of max/min e_sd across the sweep "
            f"{worst:.3f} (<= 1.5)")


def test_criterion_6_property_suites(sweep_data):
    results = run_all_checks(seed=0)
    suites_ok = all(r.passed for r in results)
    n_records = 0
    residual_ok = True
    ordering_ok = True
    worst_residual = 0.0
    for layout in LAYOUTS:
        for N in CHAIN:
            for mu0 in MU0S:
                for rec in sweep_data[layout]["recs"][N][mu0]:
                    n_records += 1
                    worst_residual = max(worst_residual,
                                         rec.stats.final_rel_residual)
                    residual_ok &= (rec.stats.converged
                                    and rec.stats.final_rel_residual <= TOL)
                    ordering_ok &= rec.e_eps <= rec.e_sd
    # independent residual recomputation, one instance per layout
    recheck_ok = True
    for layout in LAYOUTS:
        mesh = build_mesh(MeshParams(N=12, eps=1e-8), layout)
        system = assemble(mesh, benchmark_problem(1e-8),
                          default_delta_rule(12))
        x, stats = gmres(system.matrix, system.rhs, tol=TOL)
        rel = (np.linalg.norm(system.rhs - spmv(system.matrix, x))
               / np.linalg.norm(system.rhs))
        recheck_ok &= stats.converged and rel <= TOL
    ok = suites_ok and residual_ok and ordering_ok and recheck_ok
    _report(ok, "criterion 6 (property suites)",
            f"{sum(r.passed for r in results)}/{len(results)} check suites "
            f"pass; true residual <= {TOL:g} on all {n_records} solves "
            f"(worst {worst_residual:.2e}); e_eps <= e_sd on every record; "
            f"independent residual recheck {'ok' if recheck_ok else 'FAILED'}")


# shape functions in cell-normalized coordinates for each vertex convention
_FRAMES = {
    CellKind.TRI1: (3, lambda u, v: np.array([1 - u - v, u, v])),
    CellKind.TRI2: (3, lambda u, v: np.array([1 - u, 1 - v, u + v - 1])),
    CellKind.QUAD: (4, lambda u, v: np.array([(1 - u) * (1 - v),
                                              u * (1 - v), u * v,
                                              (1 - u) * v])),
}
_LATTICE = [(k / 6, l / 6) for k in range(7) for l in range(7)]


def _inside(kind, u, v):
    if kind is CellKind.TRI1:
        return u + v <= 1 + 1e-12
    if kind is CellKind.TRI2:
        return u + v >= 1 - 1e-12
    return True


def _interp_sup(mesh, eps):
    """sup |u - u^I| over the smooth region and the whole domain, sampled
    on a 7x7 lattice per parent rectangle."""
    coeffs = interpolate(mesh, benchmark_problem(eps).exact).coeffs
    gi = mesh.cell_grid[:, 0]
    gj = mesh.cell_grid[:, 1]
    x0 = mesh.grid_x.coords[gi]
    omx0 = mesh.grid_x.complements[gi]
    hx = mesh.grid_x.widths[gi]
    y0 = mesh.grid_y.coords[gj]
    omy0 = mesh.grid_y.complements[gj]
    hy = mesh.grid_y.widths[gj]
    N = mesh.params.N
    smooth = (gi < N // 2) & (gj >= N // 3) & (gj < 2 * N // 3)
    sup_smooth = 0.0
    sup_all = 0.0
    for code in np.unique(mesh.cell_kind):
        sel = mesh.cell_kind == code
        kind = mesh.cells[int(np.flatnonzero(sel)[0])].kind
        nv, shapes = _FRAMES[kind]
        vals = coeffs[mesh.cell_verts[sel][:, :nv]]
        in_smooth = smooth[sel]
        for u, v in _LATTICE:
            if not _inside(kind, u, v):
                continue
            uh = vals @ shapes(u, v)
            x = x0[sel] + u * hx[sel]
            y = y0[sel] + v * hy[sel]
            err = np.abs(uh - exact_u(x, y, eps,
                                      omx=omx0[sel] - u * hx[sel],
                                      omy=omy0[sel] - v * hy[sel]))
            sup_all = max(sup_all, err.max())
            if in_smooth.any():
                sup_smooth = max(sup_smooth, err[in_smooth].max())
    return sup_smooth, sup_all


def test_criterion_7_interpolation_error_rates():
    Ns = (12, 24, 48, 96)
    eps = 1e-8
    smooth, whole = [], []
    for N in Ns:
        mesh = build_mesh(MeshParams(N=N, eps=eps), "triangular")
        s, w = _interp_sup(mesh, eps)
        smooth.append(s)
        whole.append(w)
    p_smooth = fit_order(Ns, smooth)
    p_whole = fit_order(Ns, whole, ln_power=2.0)
    ok = p_smooth >= 1.9 and p_whole >= 1.7
    _report(ok, "criterion 7 (interpolation error)",
            f"smooth-region sup order {p_smooth:.2f} (>= 1.9), whole-domain "
            f"order vs N^-2 ln^2 N {p_whole:.2f} (>= 1.7)")
