"""End-to-end command-line behavior: exit codes, files written, determinism."""

from __future__ import annotations

import json

import numpy as np
import pytest

from fracopt.cli import main
from fracopt.io import RESULT_COLUMNS, save_matrix_csv, save_vector_csv


@pytest.fixture()
def sgep_files(tmp_path):
    a_path = tmp_path / "A.csv"
    b_path = tmp_path / "B.csv"
    save_matrix_csv(a_path, np.diag([2.0, 1.0]))
    save_matrix_csv(b_path, np.diag([1.0, 4.0]))
    return a_path, b_path


def run_cli(*argv: str) -> int:
    return main([str(arg) for arg in argv])


def test_solve_small_eigenproblem(sgep_files, capsys):
    a_path, b_path = sgep_files
    code = run_cli(
        "solve", "sgep", "--matrix-a", a_path, "--matrix-b", b_path, "-r", "1"
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert abs(payload["objective"] - 0.5) <= 1e-12
    assert payload["converged_reason"] == "step_tol"
    assert payload["criticality_residual"] <= 1e-10
    assert payload["iterations"] >= 1
    assert "wall_time_s" in payload


def test_solve_then_verify_round_trip(sgep_files, tmp_path, capsys):
    a_path, b_path = sgep_files
    trace_path = tmp_path / "trace.csv"
    code = run_cli(
        "solve", "sgep",
        "--matrix-a", a_path, "--matrix-b", b_path, "-r", "2",
        "--x0", _write_vector(tmp_path, "x0.csv", [0.6, 0.8]),
        "--solver", "pgsa", "--trace", trace_path,
    )
    assert code == 0
    capsys.readouterr()
    code = run_cli(
        "verify", "--trace", trace_path, "--problem", "sgep",
        "--matrix-a", a_path, "--matrix-b", b_path, "-r", "2",
        "--mode", "pgsa", "--rate-fit",
    )
    out = capsys.readouterr().out
    assert code == 0
    assert "zero violations" in out


def _write_vector(tmp_path, name, values):
    path = tmp_path / name
    save_vector_csv(path, np.asarray(values, dtype=float))
    return path


def test_verify_flags_corrupted_trace(sgep_files, tmp_path, capsys):
    a_path, b_path = sgep_files
    trace_path = tmp_path / "trace.csv"
    run_cli(
        "solve", "sgep",
        "--matrix-a", a_path, "--matrix-b", b_path, "-r", "2",
        "--x0", _write_vector(tmp_path, "x0.csv", [0.6, 0.8]),
        "--solver", "pgsa", "--trace", trace_path,
    )
    capsys.readouterr()
    lines = trace_path.read_text().splitlines()
    # Push the k=1 objective (third line) above the starting value, which no
    # monotone run can produce.
    cells = lines[2].split(",")
    cells[1] = repr(float(cells[1]) + 10.0)
    lines[2] = ",".join(cells)
    trace_path.write_text("\n".join(lines) + "\n")
    code = run_cli(
        "verify", "--trace", trace_path, "--problem", "sgep",
        "--matrix-a", a_path, "--matrix-b", b_path, "-r", "2", "--mode", "pgsa",
    )
    out = capsys.readouterr().out
    assert code == 1
    assert "violation at iteration 1" in out
    assert "audit failed" in out


def test_verify_missing_trace_file_is_io_error(sgep_files, tmp_path, capsys):
    a_path, b_path = sgep_files
    code = run_cli(
        "verify", "--trace", tmp_path / "missing.csv", "--problem", "sgep",
        "--matrix-a", a_path, "--matrix-b", b_path, "-r", "2",
    )
    assert code == 3
    assert "error:" in capsys.readouterr().err


def test_solve_ragged_csv_is_io_error(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0,2.0\n3.0\n")
    b_path = tmp_path / "B.csv"
    save_matrix_csv(b_path, np.eye(2))
    code = run_cli("solve", "sgep", "--matrix-a", bad, "--matrix-b", b_path, "-r", "1")
    assert code == 3
    assert "line 2" in capsys.readouterr().err


def test_solve_oversized_sparsity_is_validation_error(sgep_files, capsys):
    a_path, b_path = sgep_files
    code = run_cli(
        "solve", "sgep", "--matrix-a", a_path, "--matrix-b", b_path, "-r", "5"
    )
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_solve_infeasible_start_is_solver_error(sgep_files, tmp_path, capsys):
    a_path, b_path = sgep_files
    dense = _write_vector(tmp_path, "dense.csv", [0.6, 0.8])
    code = run_cli(
        "solve", "sgep",
        "--matrix-a", a_path, "--matrix-b", b_path, "-r", "1", "--x0", dense,
    )
    assert code == 5
    assert "error:" in capsys.readouterr().err


def test_solve_mismatched_matrices_is_dimension_error(tmp_path, capsys):
    a_path = tmp_path / "A.csv"
    b_path = tmp_path / "B.csv"
    save_matrix_csv(a_path, np.eye(2))
    save_matrix_csv(b_path, np.eye(3))
    code = run_cli("solve", "sgep", "--matrix-a", a_path, "--matrix-b", b_path, "-r", "1")
    assert code == 4
    code = run_cli(
        "solve", "sgep", "--matrix-a", a_path, "--matrix-b", a_path, "-r", "1",
        "--x0", _write_vector(tmp_path, "x3.csv", [1.0, 0.0, 0.0]),
    )
    assert code == 4
    capsys.readouterr()


def test_solve_l1l2_dimension_mismatch(tmp_path, capsys):
    a_path = tmp_path / "A.csv"
    save_matrix_csv(a_path, np.ones((2, 3)))
    b_path = _write_vector(tmp_path, "b.csv", [1.0, 2.0, 3.0])
    code = run_cli("solve", "l1l2", "--matrix-a", a_path, "--vector-b", b_path)
    assert code == 4
    capsys.readouterr()


def test_solve_config_with_unknown_key_is_validation_error(sgep_files, tmp_path, capsys):
    a_path, b_path = sgep_files
    cfg = tmp_path / "solver.json"
    cfg.write_text('{"momentum": 0.9}')
    code = run_cli(
        "solve", "sgep", "--matrix-a", a_path, "--matrix-b", b_path, "-r", "1",
        "--config", cfg,
    )
    assert code == 2
    assert "momentum" in capsys.readouterr().err


def test_solve_config_with_bad_json_is_io_error(sgep_files, tmp_path, capsys):
    a_path, b_path = sgep_files
    cfg = tmp_path / "solver.json"
    cfg.write_text("{not json")
    code = run_cli(
        "solve", "sgep", "--matrix-a", a_path, "--matrix-b", b_path, "-r", "1",
        "--config", cfg,
    )
    assert code == 3
    capsys.readouterr()


def _bench_config(tmp_path, **extra):
    data = {
        "experiment": "sfda",
        "solver": "pgsa_ml",
        "trials": 2,
        "master_seed": 0,
        "n": 50,
        "p1": 60,
        "p2": 60,
        "r": 5,
    }
    data.update(extra)
    path = tmp_path / "bench.json"
    path.write_text(json.dumps(data))
    return path


def test_bench_writes_results_and_records(tmp_path, capsys):
    cfg = _bench_config(tmp_path)
    out_dir = tmp_path / "out"
    code = run_cli("bench", "--config", cfg, "--out-dir", out_dir)
    assert code == 0
    lines = (out_dir / "results.csv").read_text().strip().splitlines()
    assert lines[0] == ",".join(RESULT_COLUMNS)
    assert len(lines) == 2
    records = [
        json.loads(line)
        for line in (out_dir / "runs.jsonl").read_text().splitlines()
    ]
    assert len(records) == 2
    assert all(record["solver"] == "pgsa_ml" for record in records)
    assert all("wall_time_s" not in record for record in records)
    assert "wrote:" in capsys.readouterr().out


def test_bench_zero_trials_writes_header_only(tmp_path, capsys):
    cfg = _bench_config(tmp_path, trials=0)
    out_dir = tmp_path / "out"
    code = run_cli("bench", "--config", cfg, "--out-dir", out_dir)
    assert code == 0
    lines = (out_dir / "results.csv").read_text().strip().splitlines()
    assert lines == [",".join(RESULT_COLUMNS)]
    assert (out_dir / "runs.jsonl").read_text() == ""
    capsys.readouterr()


def test_bench_records_do_not_depend_on_thread_count(tmp_path, capsys):
    cfg = _bench_config(tmp_path, trials=3)
    first = tmp_path / "one"
    second = tmp_path / "two"
    assert run_cli("bench", "--config", cfg, "--out-dir", first, "--threads", "1") == 0
    assert run_cli("bench", "--config", cfg, "--out-dir", second, "--threads", "3") == 0
    capsys.readouterr()
    assert (first / "runs.jsonl").read_bytes() == (second / "runs.jsonl").read_bytes()
    # The aggregate table is identical except for wall time, which is the one
    # deliberately non-reproducible column.
    for one, two in zip(
        (first / "results.csv").read_text().splitlines(),
        (second / "results.csv").read_text().splitlines(),
    ):
        cells_one = one.split(",")
        cells_two = two.split(",")
        time_idx = RESULT_COLUMNS.index("mean_time_s")
        cells_one[time_idx] = cells_two[time_idx] = ""
        assert cells_one == cells_two


def test_bench_l1l2_reports_success_rate(tmp_path, capsys):
    cfg = _bench_config(
        tmp_path,
        experiment="l1l2",
        trials=2,
        n=60,
        m=20,
        k=3,
        dct_f=1.0,
    )
    out_dir = tmp_path / "out"
    code = run_cli("bench", "--config", cfg, "--out-dir", out_dir)
    assert code == 0
    capsys.readouterr()
    lines = (out_dir / "results.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    row = lines[1].split(",")
    rate = float(row[header.index("success_rate")])
    assert 0.0 <= rate <= 1.0
    records = [
        json.loads(line)
        for line in (out_dir / "runs.jsonl").read_text().splitlines()
    ]
    assert all("relative_error" in record for record in records)


def test_bench_trace_flag_writes_trace_files(tmp_path, capsys):
    cfg = _bench_config(tmp_path, trials=1)
    out_dir = tmp_path / "out"
    code = run_cli("bench", "--config", cfg, "--out-dir", out_dir, "--trace")
    assert code == 0
    capsys.readouterr()
    traces = sorted((out_dir / "traces").glob("trace_*.csv"))
    assert len(traces) == 1
    assert "pgsa_ml" in traces[0].name


def test_bench_unknown_config_key_is_validation_error(tmp_path, capsys):
    cfg = _bench_config(tmp_path, verbosity=3)
    code = run_cli("bench", "--config", cfg, "--out-dir", tmp_path / "out")
    assert code == 2
    assert "verbosity" in capsys.readouterr().err


def test_bench_bad_json_is_io_error(tmp_path, capsys):
    cfg = tmp_path / "bench.json"
    cfg.write_text("[1, 2")
    code = run_cli("bench", "--config", cfg, "--out-dir", tmp_path / "out")
    assert code == 3
    capsys.readouterr()


def test_bench_env_override_changes_trials(tmp_path, capsys, monkeypatch):
    cfg = _bench_config(tmp_path, trials=1)
    monkeypatch.setenv("FRACOPT_TRIALS", "3")
    out_dir = tmp_path / "out"
    code = run_cli("bench", "--config", cfg, "--out-dir", out_dir)
    assert code == 0
    capsys.readouterr()
    records = (out_dir / "runs.jsonl").read_text().splitlines()
    assert len(records) == 3


def test_gen_sfda_round_trips_through_solve(tmp_path, capsys):
    out_dir = tmp_path / "gen"
    code = run_cli(
        "gen", "sfda", "--out-dir", out_dir, "--n", "20",
        "--p1", "30", "--p2", "30", "--r", "3", "--seed", "4",
    )
    assert code == 0
    meta = json.loads((out_dir / "meta.json").read_text())
    assert meta["n"] == 20
    assert meta["within_ridge"] == 0.5
    capsys.readouterr()
    code = run_cli(
        "solve", "sgep",
        "--matrix-a", out_dir / "A.csv", "--matrix-b", out_dir / "B.csv", "-r", "3",
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["objective"] > 0.0


def test_gen_l1l2_round_trips_through_solve(tmp_path, capsys):
    out_dir = tmp_path / "gen"
    code = run_cli(
        "gen", "l1l2", "--out-dir", out_dir, "--n", "60", "--m", "20", "--k", "3",
    )
    assert code == 0
    capsys.readouterr()
    code = run_cli(
        "solve", "l1l2",
        "--matrix-a", out_dir / "A.csv", "--vector-b", out_dir / "b.csv",
        "--relative-tol",
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["objective"] > 0.0
    truth = np.loadtxt(out_dir / "xtrue.csv")
    assert truth.shape == (60,)
