# -*- coding: utf-8 -*-
import json

import numpy as np
import pytest

from omplab.errors import DimensionError, IllConditionedError
from omplab.omp import (ILL_CONDITIONED, MAX_ITERATIONS, RESIDUAL_ZERO, SparseVector, StopRule, error_vector,
                        export_trace, format_trace, omp_solve, reconstruct, residual_at, select_next_index,
                        support_energy)
from omplab.sensing import SensingMatrix, gen_bernoulli


def test_sparse_vector_normalizes_support():
    x = SparseVector(6, (4, 1), (2.0, -1.0))
    assert x.support == (1, 4)
    assert x.values == (-1.0, 2.0)
    assert x.k == 2
    assert x.l1_norm() == 3.0
    np.testing.assert_array_equal(x.dense(), [0, -1, 0, 0, 2, 0])
    assert SparseVector.from_dense(x.dense()) == x
    assert SparseVector.zero(3).k == 0


@pytest.mark.parametrize("support, values", [
    ((1, 1), (1.0, 2.0)),
    ((6,), (1.0,)),
    ((0,), (0.0,)),
    ((0,), (np.nan,)),
])
def test_sparse_vector_rejects_invalid(support, values):
    with pytest.raises(ValueError):
        SparseVector(6, support, values)


def test_identity_single_step(identity4):
    trace = omp_solve(identity4, [0.0, 0.0, 3.0, 0.0])
    assert trace.termination == RESIDUAL_ZERO
    assert len(trace) == 1
    step = trace.steps[0]
    assert step.selected_index == 2
    assert step.support == (2,)
    np.testing.assert_allclose(step.coefficients, [3.0])
    assert step.residual_norm == 0.0
    np.testing.assert_array_equal(reconstruct(trace, 1), [0.0, 0.0, 3.0, 0.0])


def test_orthonormal_selects_by_magnitude(orthonormal8):
    x = SparseVector(8, (1, 5, 6), (-2.0, 3.0, 1.0))
    trace = omp_solve(orthonormal8, orthonormal8.data @ x.dense())
    assert trace.termination == RESIDUAL_ZERO
    assert [s.selected_index for s in trace.steps] == [5, 1, 6]
    np.testing.assert_allclose(reconstruct(trace, 3), x.dense(), atol=1e-12)


def test_select_next_index_ties_and_errors(identity4):
    index, magnitudes = select_next_index(identity4, [1.0, -1.0, 0.0, 0.0])
    assert index == 0
    np.testing.assert_array_equal(magnitudes, [1.0, 1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        select_next_index(identity4, np.zeros(4))
    with pytest.raises(IllConditionedError):
        select_next_index(identity4, [1.0, 0.0, 0.0, 0.0], support=(0,))
    with pytest.raises(DimensionError):
        select_next_index(identity4, [1.0, 0.0])


def test_zero_measurements_stop_immediately(identity4):
    trace = omp_solve(identity4, np.zeros(4))
    assert trace.termination == RESIDUAL_ZERO
    assert len(trace) == 0
    assert trace.final_support == ()


def test_max_iterations(identity4):
    trace = omp_solve(identity4, [4.0, 3.0, 2.0, 1.0], StopRule(max_iterations=2))
    assert trace.termination == MAX_ITERATIONS
    assert [s.selected_index for s in trace.steps] == [0, 1]
    assert trace.steps[-1].residual_norm == pytest.approx(np.sqrt(5.0))


def test_stop_rule_validation(identity4):
    with pytest.raises(ValueError):
        omp_solve(identity4, [1.0, 0.0, 0.0, 0.0], StopRule(max_iterations=5))
    with pytest.raises(ValueError):
        omp_solve(identity4, [1.0, 0.0, 0.0, 0.0], StopRule(max_iterations=0))
    with pytest.raises(ValueError):
        omp_solve(identity4, [1.0, 0.0, 0.0, 0.0], StopRule(residual_tol=-1.0))


def test_residual_tolerance_stops_early(identity4):
    trace = omp_solve(identity4, [4.0, 3.0, 0.1, 0.0], StopRule(residual_tol=0.5))
    assert trace.termination == RESIDUAL_ZERO
    assert len(trace) == 2


def test_dimension_mismatch(identity4):
    with pytest.raises(DimensionError):
        omp_solve(identity4, [1.0, 2.0])


def test_ill_conditioned_run_ends_gracefully():
    # duplicate column; the residual after one step is orthogonal to every column
    phi = SensingMatrix(np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]))
    trace = omp_solve(phi, [1.0, 0.0, 1.0])
    assert trace.termination == ILL_CONDITIONED
    assert len(trace) == 1
    assert trace.final_support == (0,)


def test_residuals_are_consistent_and_non_increasing():
    phi = gen_bernoulli(16, 32, 3)
    x = SparseVector(32, (2, 9, 17, 30), (1.0, -0.5, 2.0, 0.25))
    y = phi.data @ x.dense()
    trace = omp_solve(phi, y)
    norms = [np.linalg.norm(y)] + [s.residual_norm for s in trace.steps]
    assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))
    for l, step in enumerate(trace.steps, start=1):
        r = residual_at(trace, l)
        assert np.linalg.norm(r) == pytest.approx(step.residual_norm, abs=1e-10)
        # the residual is orthogonal to the selected columns
        np.testing.assert_allclose(phi.data[:, list(step.support)].T @ r, 0.0, atol=1e-10)
        # phi z^l = r^l when y = phi x
        np.testing.assert_allclose(phi.data @ error_vector(trace, x, l), r, atol=1e-10)


def test_support_energy():
    x = SparseVector(5, (0, 3), (2.0, -1.0))
    assert support_energy(x, {0, 3}) == 5.0
    assert support_energy(x, [3, 4]) == 1.0
    assert support_energy(x, ()) == 0.0


def test_reconstruct_range(identity4):
    trace = omp_solve(identity4, [1.0, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(reconstruct(trace, 0), np.zeros(4))
    with pytest.raises(IndexError):
        reconstruct(trace, 2)


def test_trace_export(tmp_path, identity4):
    trace = omp_solve(identity4, [0.0, 2.0, 0.0, -1.0])
    lines = format_trace(trace).splitlines()
    header = json.loads(lines[0])
    assert header["format"] == "omplab-trace v1"
    assert header["steps"] == 2
    assert header["termination"] == RESIDUAL_ZERO
    records = [json.loads(line) for line in lines[1:]]
    assert [r["selected_index"] for r in records] == [1, 3]
    assert records[-1]["support"] == [1, 3]

    path = tmp_path / "trace.jsonl"
    export_trace(trace, path)
    assert path.read_text() == format_trace(trace)


def test_trace_matches_golden_file(tmp_path, golden):
    trace = omp_solve(SensingMatrix(np.eye(6)), [0.0, 3.0, 0.0, -2.0, 0.0, 1.0])
    path = tmp_path / "trace.jsonl"
    export_trace(trace, path)
    golden("trace_identity6.jsonl", path.read_bytes())
