"""End-to-end CLI behavior: exit codes, output formats, file emission."""
import csv
import io
import json

import pytest

from layerfem.cli import (EXIT_INCOMPLETE, EXIT_OK, EXIT_PROPERTY,
                          EXIT_SOLVER, EXIT_USAGE, main)

STARVED = ["--precond", "none", "--restart", "2", "--max-outer", "1",
           "--tol", "1e-14", "--eps", "1e-16"]


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_mesh_dumps_json(capsys):
    code, out, err = run(capsys, "mesh", "--N", "12", "--eps", "1e-8")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert len(payload["nodes"]) == 169
    assert len(payload["cells"]) == 288
    assert len(payload["boundary"]) == 48
    assert err == ""


def test_mesh_rejects_bad_N(capsys):
    code, out, err = run(capsys, "mesh", "--N", "7")
    assert code == EXIT_USAGE
    assert "divisible by 6" in err


def test_mesh_warns_on_large_eps(capsys):
    code, out, err = run(capsys, "mesh", "--N", "12", "--eps", "0.1")
    assert code == EXIT_OK
    assert err.startswith("warning:")
    json.loads(out)


def test_mesh_writes_file(capsys, tmp_path):
    target = tmp_path / "mesh.json"
    code, out, err = run(capsys, "mesh", "--N", "12", "--layout", "hybrid1",
                         "--out", str(target))
    assert code == EXIT_OK
    assert f"mesh written to {target} (169 nodes, 264 cells)" in out
    payload = json.loads(target.read_text())
    assert payload["meta"]["layout"] == "hybrid1"


def test_solve_csv_roundtrip(capsys):
    code, out, err = run(capsys, "solve", "--N", "12", "--eps", "1e-8")
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 1
    row = rows[0]
    assert row["layout"] == "triangular" and row["N"] == "12"
    assert float(row["eps"]) == 1e-8
    assert float(row["e_eps"]) <= float(row["e_sd"])
    assert row["converged"] == "True"


def test_solve_json_format(capsys):
    code, out, err = run(capsys, "solve", "--N", "12", "--layout", "rect" +
                         "angular", "--format", "json")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["layout"] == "rectangular"
    assert payload["converged"] is True
    assert payload["final_rel_residual"] <= 1e-12
    assert set(payload) == {"layout", "N", "eps", "e_eps", "e_sd",
                            "iterations", "restarts", "final_rel_residual",
                            "converged"}


def test_solve_md_format(capsys):
    code, out, err = run(capsys, "solve", "--N", "12", "--format", "md")
    assert code == EXIT_OK
    assert out.splitlines()[0].startswith("| layout | N | eps |")


def test_solve_rejects_inadmissible_delta(capsys):
    code, out, err = run(capsys, "solve", "--N", "12", "--delta-s", "0.9")
    assert code == EXIT_USAGE
    assert err.startswith("error:")
    assert "0.444" in err  # the mu0/(2 sup c^2) bound for mu0=2


def test_solve_reports_solver_failure(capsys):
    code, out, err = run(capsys, "solve", "--N", "12", *STARVED)
    assert code == EXIT_SOLVER
    assert "solver failed:" in err
    # the record is still emitted for inspection
    row = next(csv.DictReader(io.StringIO(out)))
    assert row["converged"] == "False"


def test_solve_takes_single_N(capsys):
    code, out, err = run(capsys, "solve", "--N", "12,24")
    assert code == EXIT_USAGE
    assert "single --N" in err


def test_study_writes_file_set(capsys, tmp_path):
    base = tmp_path / "conv"
    code, out, err = run(capsys, "study", "--N", "6,12",
                         "--eps-list", "1e-8", "--out", str(base))
    assert code == EXIT_OK
    for suffix in (".csv", ".md", "_records.csv", "_plot.csv"):
        assert (tmp_path / f"conv{suffix}").exists()
    assert "study files written:" in err
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["N"] for r in rows] == ["6", "12"]
    # stdout matches the csv artifact
    assert out == (tmp_path / "conv.csv").read_text()


def test_study_strips_csv_extension(capsys, tmp_path):
    base = tmp_path / "t.csv"
    code, out, err = run(capsys, "study", "--N", "6", "--eps-list", "1e-8",
                         "--out", str(base))
    assert code == EXIT_OK
    assert (tmp_path / "t.csv").exists()
    assert (tmp_path / "t.md").exists()


def test_study_incomplete_exit_code(capsys, tmp_path):
    code, out, err = run(capsys, "study", "--N", "6", "--eps-list", "1e-16",
                         "--precond", "none", "--restart", "2",
                         "--max-outer", "1", "--tol", "1e-14",
                         "--out", str(tmp_path / "bad"))
    assert code == EXIT_INCOMPLETE
    assert "study incomplete" in err


def test_study_markdown_to_stdout(capsys, tmp_path):
    code, out, err = run(capsys, "study", "--N", "6", "--eps-list", "1e-8",
                         "--format", "md", "--out", str(tmp_path / "s"))
    assert code == EXIT_OK
    assert "| N | e_eps | rate | e_sd | rate |" in out


def test_check_passes_and_is_deterministic(capsys):
    code1, out1, err1 = run(capsys, "check", "--seed", "42")
    assert code1 == EXIT_OK
    lines = out1.strip().splitlines()
    assert len(lines) == 5
    assert all(line.startswith("PASS ") for line in lines)
    code2, out2, err2 = run(capsys, "check", "--seed", "42")
    assert out2 == out1


def test_check_json_format(capsys):
    code, out, err = run(capsys, "check", "--format", "json")
    assert code == EXIT_OK
    results = json.loads(out)
    assert len(results) == 5
    assert all(r["passed"] for r in results)
    assert {r["name"] for r in results} == {
        "quadrature", "coercivity", "dense-oracle", "pde-residual",
        "norm-forms"}


def test_bench_reports_backends(capsys):
    code, out, err = run(capsys, "bench", "--N", "6")
    assert code == EXIT_OK
    assert out.startswith("bench: layout=triangular N=6")
    assert "assemble" in out and "solve" in out


def test_usage_errors(capsys):
    assert run(capsys, )[0] == EXIT_USAGE          # missing subcommand
    assert run(capsys, "frobnicate")[0] == EXIT_USAGE
    assert run(capsys, "mesh", "--N", "twelve")[0] == EXIT_USAGE
    assert run(capsys, "--help")[0] == EXIT_OK


def test_entry_point_is_wired():
    import layerfem.cli
    assert callable(layerfem.cli.entry)
