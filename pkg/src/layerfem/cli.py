"""Command-line front end.

Subcommands: ``mesh`` (build + validate + dump), ``solve`` (one benchmark
run), ``study`` (convergence tables), ``check`` (verification suites), and
``bench`` (kernel backend comparison).

Exit codes: 0 success, 1 property failure, 2 usage error, 3 solver failure,
4 incomplete study.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, replace

from . import _checks, analysis
from ._backend import available_backends
from .assembly import StabilizationConfig, assemble
from .linalg import gmres
from .mesh import Layout, MeshParams, build_mesh, validate_mesh
from .problems import benchmark_problem

EXIT_OK = 0
EXIT_PROPERTY = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_INCOMPLETE = 4

_LAYOUTS = [l.value for l in Layout]


class OverriddenDeltaRule:
    """Default stabilization rule with fixed per-region overrides applied.

    A module-level class (not a closure) so study workers can pickle it.
    """

    def __init__(self, overrides: dict[str, float]):
        self.overrides = dict(overrides)

    def __call__(self, N: int) -> StabilizationConfig:
        return replace(analysis.default_delta_rule(N), **self.overrides)


@dataclass
class RunConfig:
    command: str
    N_list: list[int]
    eps: float
    eps_list: list[float] | None
    layout: str
    mu0: float
    delta_overrides: dict[str, float]
    rho: float
    beta: float
    tol: float
    restart: int
    max_outer: int
    precond: str
    jobs: int
    deterministic: bool
    fmt: str
    out: str | None
    seed: int


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer list: {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a float list: {text!r}")


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("LAYERFEM_JOBS", "1")))
    except ValueError:
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layerfem",
        description="Streamline-diffusion FEM on layer-adapted meshes")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_solver=True):
        p.add_argument("--N", type=_int_list, default=[12],
                       help="mesh parameter (comma list for study)")
        p.add_argument("--eps", type=float, default=1e-8,
                       help="singular perturbation parameter")
        p.add_argument("--eps-list", type=_float_list, default=None,
                       help="comma-separated eps sweep (study)")
        p.add_argument("--layout", choices=_LAYOUTS, default="triangular")
        p.add_argument("--mu0", type=float, default=2.0,
                       help="coercivity constant weighting the norms")
        p.add_argument("--rho", type=float, default=2.5,
                       help="transition-point factor")
        p.add_argument("--beta", type=float, default=1.0,
                       help="convection lower bound used by the mesh")
        for name in ("delta-s", "delta-x", "delta-y", "delta-xy"):
            p.add_argument(f"--{name}", type=float, default=None,
                           help=f"override {name.replace('-', '_')}")
        if with_solver:
            p.add_argument("--tol", type=float, default=1e-12)
            p.add_argument("--restart", type=int, default=60)
            p.add_argument("--max-outer", type=int, default=200)
            p.add_argument("--precond", choices=["none", "jacobi", "ilu0"],
                           default="ilu0")
        p.add_argument("--jobs", type=int, default=_default_jobs())
        p.add_argument("--deterministic", action="store_true",
                       help="serial execution with fixed seeds")
        p.add_argument("--format", dest="fmt", choices=["csv", "md", "json"],
                       default="csv")
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--seed", type=int, default=0)

    add_common(sub.add_parser("mesh", help="build, validate and dump a mesh"),
               with_solver=False)
    add_common(sub.add_parser("solve", help="solve one benchmark instance"))
    add_common(sub.add_parser("study", help="convergence study over N"))
    add_common(sub.add_parser("check", help="run the verification suites"),
               with_solver=False)
    add_common(sub.add_parser("bench", help="compare kernel backends"))
    return parser


def _config_from_args(args) -> RunConfig:
    overrides = {}
    for flag, field_name in (("delta_s", "delta_s"), ("delta_x", "delta_x"),
                             ("delta_y", "delta_y"), ("delta_xy", "delta_xy")):
        v = getattr(args, flag, None)
        if v is not None:
            overrides[field_name] = v
    jobs = 1 if args.deterministic else max(1, args.jobs)
    return RunConfig(
        command=args.command,
        N_list=list(args.N),
        eps=float(args.eps),
        eps_list=([float(e) for e in args.eps_list]
                  if args.eps_list else None),
        layout=args.layout,
        mu0=args.mu0,
        delta_overrides=overrides,
        rho=args.rho,
        beta=args.beta,
        tol=getattr(args, "tol", 1e-12),
        restart=getattr(args, "restart", 60),
        max_outer=getattr(args, "max_outer", 200),
        precond=getattr(args, "precond", "ilu0"),
        jobs=jobs,
        deterministic=args.deterministic,
        fmt=args.fmt,
        out=args.out,
        seed=args.seed,
    )


def _single_N(config: RunConfig) -> int:
    if len(config.N_list) != 1:
        raise ValueError(f"{config.command} takes a single --N, "
                         f"got {config.N_list}")
    return config.N_list[0]


def _delta_config(config: RunConfig, N: int) -> StabilizationConfig:
    base = analysis.default_delta_rule(N)
    if config.delta_overrides:
        base = replace(base, **config.delta_overrides)
    return base


def _mesh_params(config: RunConfig, N: int, eps: float) -> MeshParams:
    return MeshParams(N=N, eps=eps, beta=config.beta, rho=config.rho)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_mesh(config: RunConfig) -> int:
    N = _single_N(config)
    params = _mesh_params(config, N, config.eps)
    mesh = build_mesh(params, config.layout)
    report = validate_mesh(mesh)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    payload = json.dumps(mesh.to_json_dict()) + "\n"
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(payload)
        print(f"mesh written to {config.out} "
              f"({mesh.n_nodes} nodes, {mesh.n_cells} cells)")
    else:
        sys.stdout.write(payload)
    if not report.ok:
        for failure in report.failures:
            print(f"validation failure: {failure}", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def _solve_csv(record, layout: str) -> str:
    return ("layout,N,eps,e_eps,e_sd,iters,converged\n"
            f"{layout},{record.N},{record.eps!r},{record.e_eps!r},"
            f"{record.e_sd!r},{record.stats.iterations},"
            f"{record.stats.converged}\n")


def cmd_solve(config: RunConfig) -> int:
    N = _single_N(config)
    eps = config.eps_list[0] if config.eps_list else config.eps
    # surfaces admissibility violations before any heavy work
    record = analysis.supercloseness_error(
        N, eps, config.layout, delta_rule=_delta_config(config, N),
        mu0=config.mu0, tol=config.tol, restart=config.restart,
        max_outer=config.max_outer, precond=config.precond)
    stats = record.stats
    if config.fmt == "json":
        _emit(json.dumps({
            "layout": config.layout, "N": record.N, "eps": record.eps,
            "e_eps": record.e_eps, "e_sd": record.e_sd,
            "iterations": stats.iterations, "restarts": stats.restarts,
            "final_rel_residual": stats.final_rel_residual,
            "converged": stats.converged}, indent=2) + "\n", config.out)
    elif config.fmt == "md":
        _emit(f"| layout | N | eps | e_eps | e_sd | iters | converged |\n"
              f"| --- | ---: | ---: | ---: | ---: | ---: | --- |\n"
              f"| {config.layout} | {record.N} | {record.eps:g} | "
              f"{record.e_eps:.4e} | {record.e_sd:.4e} | "
              f"{stats.iterations} | {stats.converged} |\n", config.out)
    else:
        _emit(_solve_csv(record, config.layout), config.out)
    if not stats.converged:
        print(f"solver failed: {stats.iterations} iterations, "
              f"{stats.restarts} restarts, final relative residual "
              f"{stats.final_rel_residual:.3e} > tol {config.tol:g}",
              file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def cmd_study(config: RunConfig) -> int:
    eps_list = config.eps_list if config.eps_list else analysis.EPS_SWEEP
    delta_rule = (OverriddenDeltaRule(config.delta_overrides)
                  if config.delta_overrides else None)
    table = analysis.run_study(
        config.N_list, eps_list, layout=config.layout, delta_rule=delta_rule,
        mu0=config.mu0, jobs=config.jobs, tol=config.tol,
        restart=config.restart, max_outer=config.max_outer,
        precond=config.precond)
    base = config.out or f"study_{config.layout}"
    if base.endswith(".csv"):
        base = base[:-4]
    outputs = {
        f"{base}.csv": analysis.table_to_csv(table),
        f"{base}.md": analysis.table_to_markdown(table),
        f"{base}_records.csv": analysis.records_to_csv(table),
        f"{base}_plot.csv": analysis.plot_data_csv(table),
    }
    for path, text in outputs.items():
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    if config.fmt == "json":
        sys.stdout.write(analysis.table_to_json(table))
    elif config.fmt == "md":
        sys.stdout.write(analysis.table_to_markdown(table))
    else:
        sys.stdout.write(analysis.table_to_csv(table))
    print(f"study files written: {', '.join(outputs)}", file=sys.stderr)
    if not table.complete:
        print("study incomplete: some solves did not converge",
              file=sys.stderr)
        return EXIT_INCOMPLETE
    return EXIT_OK


def cmd_check(config: RunConfig) -> int:
    results = _checks.run_all_checks(seed=config.seed)
    if config.fmt == "json":
        sys.stdout.write(json.dumps(
            [{"name": r.name, "passed": r.passed, "detail": r.detail}
             for r in results], indent=2) + "\n")
    else:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_PROPERTY


def cmd_bench(config: RunConfig) -> int:
    N = _single_N(config)
    eps = config.eps_list[0] if config.eps_list else config.eps
    problem = benchmark_problem(eps, mu0=config.mu0)
    delta = _delta_config(config, N)
    mesh = build_mesh(_mesh_params(config, N, eps), config.layout)
    print(f"bench: layout={config.layout} N={N} eps={eps:g} "
          f"({mesh.n_cells} cells)")
    for backend in available_backends():
        t0 = time.perf_counter()
        system = assemble(mesh, problem, delta, backend=backend)
        t1 = time.perf_counter()
        # jitted kernels pay compilation on first call; time a second pass
        assemble(mesh, problem, delta, backend=backend)
        t2 = time.perf_counter()
        x, stats = gmres(system.matrix, system.rhs, restart=config.restart,
                         tol=config.tol, max_outer=config.max_outer,
                         precond=config.precond, backend=backend)
        t3 = time.perf_counter()
        print(f"  {backend}: assemble {t1 - t0:.3f}s "
              f"(warm {t2 - t1:.3f}s), solve {t3 - t2:.3f}s, "
              f"iters {stats.iterations}, converged {stats.converged}")
    return EXIT_OK


_COMMANDS = {
    "mesh": cmd_mesh,
    "solve": cmd_solve,
    "study": cmd_study,
    "check": cmd_check,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        config = _config_from_args(args)
        return _COMMANDS[config.command](config)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def entry() -> None:
    sys.exit(main())
