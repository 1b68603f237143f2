"""layerfem: streamline-diffusion FEM on layer-adapted tensor meshes.

Solves singularly perturbed convection-diffusion problems on Shishkin meshes
with P1 triangles, Q1 rectangles, or conforming hybrids of the two, and ships
the convergence-study harness measuring supercloseness of the discrete
solution to the nodal interpolant.
"""
from ._backend import available_backends, resolve_backend
from .mesh import (Cell, CellKind, Grid1D, Layout, MeshParams, RegionTag,
                   ShishkinMesh, TransitionParams, ValidationReport,
                   build_grid, build_mesh, cell_from_coords,
                   compute_transition_params, validate_mesh)
from .fem_core import (P1_TRI, Q1_QUAD, ElementKind, QuadratureRule,
                       ReferenceElement, map_to_physical, physical_gradients,
                       quadrature_for, reference_element, shape_eval)
from .linalg import (SolveStats, SparseMatrix, build_preconditioner, gmres,
                     spmv)
from .assembly import (CoercivityReport, DiscreteSystem, Problem,
                       StabilizationConfig, assemble, coercivity_check,
                       delta_for, local_matrix, local_rhs,
                       validate_stabilization, write_matrix_market)
from .problems import (BenchmarkProblem, ExactSolution, LayerFactors,
                       benchmark_problem, exact_grad, exact_u, layer_factors,
                       rhs_f)
from .analysis import (EPS_SWEEP, ConvergenceTable, ErrorRecord, FEFunction,
                       TableRow, default_delta_rule, energy_norm_sq,
                       fit_order, interpolate, run_study, sd_norm_sq,
                       solve_benchmark, supercloseness_error, sweep_records,
                       table_to_csv, table_to_json, table_to_markdown)
from .cli import main

__version__ = "0.1.0"

__all__ = [
    "available_backends", "resolve_backend",
    "Cell", "CellKind", "Grid1D", "Layout", "MeshParams", "RegionTag",
    "ShishkinMesh", "TransitionParams", "ValidationReport", "build_grid",
    "build_mesh", "cell_from_coords", "compute_transition_params",
    "validate_mesh",
    "P1_TRI", "Q1_QUAD", "ElementKind", "QuadratureRule", "ReferenceElement",
    "map_to_physical", "physical_gradients", "quadrature_for",
    "reference_element", "shape_eval",
    "SolveStats", "SparseMatrix", "build_preconditioner", "gmres", "spmv",
    "CoercivityReport", "DiscreteSystem", "Problem", "StabilizationConfig",
    "assemble", "coercivity_check", "delta_for", "local_matrix", "local_rhs",
    "validate_stabilization", "write_matrix_market",
    "BenchmarkProblem", "ExactSolution", "LayerFactors", "benchmark_problem",
    "exact_grad", "exact_u", "layer_factors", "rhs_f",
    "EPS_SWEEP", "ConvergenceTable", "ErrorRecord", "FEFunction", "TableRow",
    "default_delta_rule", "energy_norm_sq", "fit_order", "interpolate",
    "run_study", "sd_norm_sq", "solve_benchmark", "supercloseness_error",
    "sweep_records", "table_to_csv", "table_to_json", "table_to_markdown",
    "main",
    "__version__",
]
