# -*- coding: utf-8 -*-
import json
from pathlib import Path

import numpy as np
import pytest

from omplab.cli import (EXIT_IO, EXIT_OK, EXIT_USAGE, SEED_ENV, emit_svg_curves, read_signal, run_command,
                        write_signal)
from omplab.errors import FormatError
from omplab.experiments import GridCell, GridConfig, GridResult, export_results, read_grid_csv
from omplab.omp import SparseVector
from omplab.sensing import SensingMatrix, gen_bernoulli, read_matrix, write_matrix


@pytest.fixture
def identity_file(tmp_path):
    path = tmp_path / "identity.mat"
    write_matrix(SensingMatrix(np.eye(6)), path)
    return path


def _stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


def test_gen_uses_seed_from_environment(tmp_path, monkeypatch, capsys):
    out = tmp_path / "phi.mat"
    assert run_command(["gen", "--m", "8", "--n", "16", "--out", str(out)]) == EXIT_OK
    assert read_matrix(out).seed == 0

    monkeypatch.setenv(SEED_ENV, "5")
    assert run_command(["gen", "--m", "8", "--n", "16", "--out", str(out)]) == EXIT_OK
    phi = read_matrix(out)
    assert phi.seed == 5
    np.testing.assert_array_equal(phi.data, gen_bernoulli(8, 16, 5).data)

    resolved = json.loads(capsys.readouterr().err.splitlines()[-1])
    assert resolved["seed"] == 5
    assert resolved["verb"] == "gen"


def test_bad_seed_environment_is_a_usage_error(tmp_path, monkeypatch):
    monkeypatch.setenv(SEED_ENV, "many")
    assert run_command(["gen", "--m", "8", "--n", "16", "--out", str(tmp_path / "phi.mat")]) == EXIT_USAGE


def test_analyze(tmp_path, capsys):
    path = tmp_path / "phi.mat"
    write_matrix(gen_bernoulli(6, 10, 3), path)
    assert run_command(["analyze", "--matrix", str(path), "--rip-order", "1", "2"]) == EXIT_OK
    doc = _stdout_json(capsys)
    assert (doc["m"], doc["n"]) == (6, 10)
    assert [r["order"] for r in doc["rip"]] == [1, 2]
    assert doc["rip"][1]["delta"] == pytest.approx(doc["coherence"], abs=1e-10)
    assert "hypotheses" not in doc

    assert run_command(["analyze", "--matrix", str(path), "--k", "1"]) == EXIT_OK
    assert _stdout_json(capsys)["hypotheses"]["feasible"] == "infeasible"


def test_solve(tmp_path, identity_file, capsys):
    signal = tmp_path / "x.txt"
    write_signal(SparseVector(6, (1, 4), (2.0, -0.5)), signal)
    out = tmp_path / "trace.jsonl"
    assert run_command(["solve", "--matrix", str(identity_file), "--signal", str(signal),
                        "--out", str(out)]) == EXIT_OK
    lines = out.read_text().splitlines()
    assert json.loads(lines[0])["steps"] == 2
    assert "recovered=True" in capsys.readouterr().err


def test_solve_dimension_mismatch(tmp_path, identity_file):
    signal = tmp_path / "x.txt"
    write_signal(SparseVector(8, (1,), (1.0,)), signal)
    assert run_command(["solve", "--matrix", str(identity_file), "--signal", str(signal)]) == EXIT_USAGE


def test_signal_file(tmp_path):
    path = tmp_path / "x.txt"
    x = SparseVector(10, (7, 2), (0.1, -3.0))
    write_signal(x, path)
    assert read_signal(path) == x

    path.write_text("10\n3\n")
    with pytest.raises(FormatError):
        read_signal(path)


def test_check_with_matrix(tmp_path, identity_file, capsys):
    out = tmp_path / "suite.json"
    argv = ["check", "--claim", "theorem-a", "--matrix", str(identity_file), "--k", "1", "2", "3",
            "--trials", "6", "--out", str(out)]
    assert run_command(argv) == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["config"]["claim"] == "theorem-A"
    assert doc["violations"] == 0


def test_check_needs_dimensions(capsys):
    assert run_command(["check", "--claim", "lemmas", "--k", "2"]) == EXIT_USAGE


def test_check_generated_matrices(capsys):
    argv = ["check", "--claim", "coherence-condition", "--m", "32", "--n", "64", "--k", "1", "--trials", "4"]
    assert run_command(argv) == EXIT_OK
    doc = _stdout_json(capsys)
    assert doc["instances"] == 4
    assert doc["reports"][0]["verdict"] == "passed"


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["gen", "--m", "8"],
    ["gen", "--m", "8", "--n", "16", "--out", "x.mat", "--colour", "red"],
    ["check", "--claim", "theorem-c", "--m", "4", "--n", "8", "--k", "1"],
    [],
])
def test_usage_errors(argv):
    assert run_command(argv) == EXIT_USAGE


def test_help_exits_cleanly(capsys):
    assert run_command(["--help"]) == EXIT_OK
    assert "omplab" in capsys.readouterr().out


def test_missing_input_is_an_io_error(tmp_path):
    assert run_command(["analyze", "--matrix", str(tmp_path / "missing.mat")]) == EXIT_IO
    assert run_command(["plot", "--grid", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "a.svg")]) == EXIT_IO


def test_malformed_matrix_is_an_io_error(tmp_path):
    path = tmp_path / "bad.mat"
    path.write_text("hello\n")
    assert run_command(["analyze", "--matrix", str(path)]) == EXIT_IO


def test_grid_then_plot(tmp_path):
    grid = tmp_path / "grid.csv"
    argv = ["grid", "--n", "16", "--m", "4", "8", "--k", "1", "2", "--trials", "3", "--workers", "1",
            "--seed", "11", "--out", str(grid), "--svg", str(tmp_path / "curves.svg")]
    assert run_command(argv) == EXIT_OK
    assert grid.read_text().startswith("m,k,trials,successes")
    assert "N=16" in (tmp_path / "curves.svg").read_text()

    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    assert run_command(["plot", "--grid", str(grid), "--out", str(first)]) == EXIT_OK
    assert run_command(["plot", "--grid", str(grid), "--out", str(second)]) == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    svg = first.read_text()
    assert "viewBox" in svg
    assert 'id="curve-k1"' in svg and 'id="curve-k2"' in svg
    assert "K=1" in svg


def test_plot_matches_golden_svg(tmp_path, golden):
    grid = Path(__file__).parent / "data" / "fixture_grid.csv"
    export_results(read_grid_csv(grid), tmp_path / "grid.csv")
    assert (tmp_path / "grid.csv").read_bytes() == grid.read_bytes()

    out = tmp_path / "curves.svg"
    assert run_command(["plot", "--grid", str(grid), "--out", str(out)]) == EXIT_OK
    assert 'id="curve-k1"' in out.read_text() and 'id="curve-k2"' in out.read_text()
    golden("fixture_grid.svg", out.read_bytes())


def test_grid_and_plot_need_one_source(tmp_path):
    assert run_command(["plot", "--out", str(tmp_path / "a.svg")]) == EXIT_USAGE
    assert run_command(["plot", "--grid", "a.csv", "--from-run", "abc", "--out", str(tmp_path / "a.svg")]) == EXIT_USAGE


def test_empty_grid_cannot_be_plotted(tmp_path):
    with pytest.raises(ValueError):
        emit_svg_curves(GridResult(None, {}, []), tmp_path / "empty.svg")


def test_fit(tmp_path, capsys):
    cells = {}
    for k, m_star in {2: 8, 3: 12, 4: 16}.items():
        for m in range(4, 17):
            cells[(m, k)] = GridCell(m, k, 10, 10 if m >= m_star else 0, 1.0, 0.0, 0)
    path = tmp_path / "grid.csv"
    export_results(GridResult(GridConfig(64, tuple(range(4, 17)), (2, 3, 4), 10), cells, []), path)

    assert run_command(["fit", "--grid", str(path), "--n", "64"]) == EXIT_OK
    doc = _stdout_json(capsys)
    assert doc["alpha"] == pytest.approx(1.0, abs=1e-6)
    assert doc["critical_m"] == {"2": 8, "3": 12, "4": 16}

    # N is not stored in the CSV
    assert run_command(["fit", "--grid", str(path)]) == EXIT_USAGE
