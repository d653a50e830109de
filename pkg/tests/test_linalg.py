# -*- coding: utf-8 -*-
import numpy as np
import pytest

from omplab.errors import DimensionError, IllConditionedError
from omplab.linalg import (SupportFactorization, as_matrix, as_vector, column, extend_factorization,
                           factorize_support, inner_product, least_squares_on_support)
from omplab.sensing import gen_gaussian_normalized


def test_as_matrix_is_read_only_copy():
    a = [[1.0, 2.0], [3.0, 4.0]]
    m = as_matrix(a)
    assert m.dtype == np.float64
    with pytest.raises(ValueError):
        m[0, 0] = 5.0


def test_as_matrix_rejects_bad_input():
    with pytest.raises(DimensionError):
        as_matrix([1.0, 2.0])
    with pytest.raises(DimensionError):
        as_matrix(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        as_matrix([[1.0, np.nan]])
    with pytest.raises(ValueError):
        as_vector([np.inf])


def test_inner_product_and_column():
    assert inner_product([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]) == 32.0
    with pytest.raises(DimensionError):
        inner_product([1.0, 2.0], [1.0, 2.0, 3.0])

    phi = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(column(phi, 2), [2.0, 5.0])
    with pytest.raises(IndexError):
        column(phi, 3)


def test_least_squares_on_identity():
    coef, residual = least_squares_on_support(np.eye(3), [1.0, 2.0, 3.0], [0, 2])
    assert coef == {0: 1.0, 2: 3.0}
    np.testing.assert_allclose(residual, [0.0, 2.0, 0.0], atol=1e-15)


def test_least_squares_matches_lstsq():
    rng = np.random.default_rng(0)
    phi = rng.standard_normal((10, 6))
    y = rng.standard_normal(10)
    support = [3, 1, 4]

    coef, residual = least_squares_on_support(phi, y, support)
    expected, *_ = np.linalg.lstsq(phi[:, support], y, rcond=None)
    np.testing.assert_allclose([coef[i] for i in support], expected, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(residual, y - phi[:, support] @ expected, atol=1e-10)
    # the residual is orthogonal to the selected columns
    np.testing.assert_allclose(phi[:, support].T @ residual, 0.0, atol=1e-10)


def test_least_squares_errors():
    with pytest.raises(ValueError):
        least_squares_on_support(np.eye(3), [1.0, 2.0, 3.0], [])
    with pytest.raises(ValueError):
        least_squares_on_support(np.eye(3), [1.0, 2.0, 3.0], [1, 1])
    with pytest.raises(IllConditionedError):
        least_squares_on_support(np.ones((2, 3)), [1.0, 2.0], [0, 1, 2])
    with pytest.raises(DimensionError):
        least_squares_on_support(np.eye(3), [1.0, 2.0], [0])


def test_dependent_column_is_ill_conditioned():
    s = 1.0 / np.sqrt(2.0)
    phi = np.array([[1.0, 0.0, s], [0.0, 1.0, s], [0.0, 0.0, 0.0]])
    y = np.array([1.0, 1.0, 1.0])
    f = factorize_support(phi, y, [0, 1])
    with pytest.raises(IllConditionedError) as info:
        extend_factorization(f, 2, y)
    assert info.value.support == (0, 1, 2)


def test_extend_factorization_returns_new_object():
    rng = np.random.default_rng(1)
    phi = rng.standard_normal((5, 4))
    y = rng.standard_normal(5)
    f0 = SupportFactorization.empty(phi)
    f1 = extend_factorization(f0, 2, y)
    f2 = extend_factorization(f1, 0, y)

    assert f0.support == ()
    assert f1.support == (2,)
    assert f2.support == (2, 0)
    np.testing.assert_allclose(f2.q.T @ f2.q, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(f2.q @ f2.r, phi[:, [2, 0]], atol=1e-12)

    with pytest.raises(ValueError):
        extend_factorization(f2, 2, y)
    with pytest.raises(IndexError):
        extend_factorization(f2, 4, y)


def test_growing_factorization_matches_direct_solve():
    phi = gen_gaussian_normalized(8, 16, 3).data
    y = np.random.default_rng(4).standard_normal(8)
    f = SupportFactorization.empty(phi)
    for index in (5, 0, 11, 3, 14):
        f = extend_factorization(f, index, y)
        cols = phi[:, list(f.support)]
        expected, *_ = np.linalg.lstsq(cols, y, rcond=None)
        np.testing.assert_allclose(f.coefficients(), expected, atol=1e-10)
        np.testing.assert_allclose(f.residual(y), y - cols @ expected, atol=1e-10)


def test_empty_factorization_residual_is_y():
    y = np.array([1.0, -2.0])
    f = SupportFactorization.empty(np.eye(2))
    assert f.coefficients().shape == (0,)
    np.testing.assert_array_equal(f.residual(y), y)
