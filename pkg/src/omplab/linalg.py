"""Dense vector/matrix primitives and least squares on a column subset.

Matrices and vectors are plain float64 :class:`numpy.ndarray` objects. The
helpers :func:`as_matrix` and :func:`as_vector` validate them (finite entries,
right number of dimensions) and hand back read-only copies, so a validated
array can be shared freely between solver runs.
"""
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import DimensionError, IllConditionedError

# a new column whose orthogonalized remainder is below this fraction of its
# norm is treated as linearly dependent on the current support
DEPENDENCE_THRESHOLD = 1e-12

# second Gram-Schmidt pass when the first removes more than half the norm
REORTHOGONALIZATION_RATIO = 0.5


def as_matrix(a) -> np.ndarray:
    """Validate and freeze a dense real matrix.

    Parameters
    ----------
    a: array_like
        Two-dimensional array of real numbers.

    Returns
    -------
    numpy.ndarray
        A read-only float64 copy.
    """
    m = np.array(a, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise DimensionError(f"Expected a non-empty 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("Matrix contains NaN or Inf entries")
    m.setflags(write=False)
    return m


def as_vector(v) -> np.ndarray:
    """Validate and freeze a dense real vector (see `as_matrix`)."""
    u = np.array(v, dtype=np.float64)
    if u.ndim != 1 or u.shape[0] == 0:
        raise DimensionError(f"Expected a non-empty 1-d vector, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError("Vector contains NaN or Inf entries")
    u.setflags(write=False)
    return u


def inner_product(u, v) -> float:
    """Euclidean inner product of two vectors of equal length."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DimensionError(f"Cannot take inner product of shapes {u.shape} and {v.shape}")
    return float(np.dot(u, v))


def column(phi, i) -> np.ndarray:
    """Return column `i` of `phi` as a new vector."""
    phi = np.asarray(phi)
    if not 0 <= i < phi.shape[1]:
        raise IndexError(f"Column index {i} out of range for {phi.shape[1]} columns")
    return phi[:, i].copy()


@dataclass(frozen=True)
class SupportFactorization:
    """Orthogonal-triangular factorization of the columns of a matrix on a support.

    ``matrix[:, support] = q @ r`` with orthonormal ``q`` (rows x k) and upper
    triangular ``r`` (k x k); ``qty`` holds ``q.T @ y`` for the right-hand side
    the factorization was built against.

    Use `empty` to start and `extend_factorization` to grow it one column at a
    time.
    """
    matrix: np.ndarray = field(repr=False)
    support: Tuple[int, ...]
    q: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    qty: np.ndarray = field(repr=False)

    @classmethod
    def empty(cls, matrix):
        matrix = np.asarray(matrix, dtype=np.float64)
        rows = matrix.shape[0]
        return cls(matrix, (), np.zeros((rows, 0)), np.zeros((0, 0)), np.zeros(0))

    def coefficients(self) -> np.ndarray:
        """Least-squares coefficients, aligned with `support`."""
        if not self.support:
            return np.zeros(0)
        return scipy.linalg.solve_triangular(self.r, self.qty, lower=False)

    def residual(self, y) -> np.ndarray:
        """``y - matrix[:, support] @ coefficients``."""
        y = np.asarray(y, dtype=np.float64)
        if not self.support:
            return y.copy()
        return y - self.matrix[:, list(self.support)] @ self.coefficients()


def extend_factorization(f: SupportFactorization, new_index: int, y) -> SupportFactorization:
    """Add one column to a support factorization.

    The new column is orthogonalized against the current ``q`` (classical
    Gram-Schmidt, repeated once when the first pass removes more than half of
    its norm).

    Parameters
    ----------
    f: SupportFactorization
    new_index: int
        Column of ``f.matrix`` to append; must not already be in the support.
    y: array_like
        Right-hand side; its projection on the new direction is appended to ``qty``.

    Returns
    -------
    SupportFactorization
        A new factorization; `f` is left untouched.
    """
    rows, cols = f.matrix.shape
    if not 0 <= new_index < cols:
        raise IndexError(f"Column index {new_index} out of range for {cols} columns")
    if new_index in f.support:
        raise ValueError(f"Column {new_index} is already in the support {list(f.support)}")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (rows,):
        raise DimensionError(f"Right-hand side has shape {y.shape}, expected ({rows},)")

    support = f.support + (new_index,)
    col = f.matrix[:, new_index]
    norm0 = np.linalg.norm(col)
    if norm0 == 0.0:
        raise IllConditionedError(f"Column {new_index} is zero", support)

    k = len(f.support)
    coeff = f.q.T @ col
    v = col - f.q @ coeff
    if k > 0 and np.linalg.norm(v) < REORTHOGONALIZATION_RATIO * norm0:
        c2 = f.q.T @ v
        v = v - f.q @ c2
        coeff = coeff + c2

    rnorm = np.linalg.norm(v)
    if rnorm < DEPENDENCE_THRESHOLD * norm0:
        raise IllConditionedError(
            f"Column {new_index} is numerically dependent on support {list(f.support)}", support)

    q_new = v / rnorm
    r = np.zeros((k + 1, k + 1))
    r[:k, :k] = f.r
    r[:k, k] = coeff
    r[k, k] = rnorm
    q = np.column_stack([f.q, q_new])
    qty = np.append(f.qty, q_new @ y)
    return SupportFactorization(f.matrix, support, q, r, qty)


def factorize_support(phi, y, support: Sequence[int]) -> SupportFactorization:
    """Build a factorization from scratch by extending column by column."""
    f = SupportFactorization.empty(phi)
    for i in support:
        f = extend_factorization(f, int(i), y)
    return f


def least_squares_on_support(phi, y, support: Sequence[int]) -> Tuple[Dict[int, float], np.ndarray]:
    """Minimize ``||y - phi z||`` over ``z`` supported on `support`.

    Parameters
    ----------
    phi: array_like
        rows x cols matrix.
    y: array_like
        Vector of length rows.
    support: sequence of int
        Non-empty list of distinct column indices, at most `rows` of them.

    Returns
    -------
    tuple
        ``(coefficients, residual)`` where coefficients maps column index to
        value and ``residual = y - phi @ z``.

    Raises
    ------
    IllConditionedError
        If the columns on `support` are numerically dependent.
    """
    phi = np.asarray(phi, dtype=np.float64)
    rows, cols = phi.shape
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (rows,):
        raise DimensionError(f"y has shape {y.shape}, expected ({rows},)")
    support = [int(i) for i in support]
    if not support:
        raise ValueError("Support must not be empty")
    if len(set(support)) != len(support):
        raise ValueError(f"Support indices must be distinct: {support}")
    if len(support) > rows:
        raise IllConditionedError(
            f"Support of size {len(support)} exceeds the {rows} available rows", support)

    f = factorize_support(phi, y, support)
    coef = f.coefficients()
    return dict(zip(support, coef.tolist())), f.residual(y)
