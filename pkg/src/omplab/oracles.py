"""Brute-force ground truth for desk-scale problems.

Both oracles enumerate column subsets in lexicographic order and solve a least
squares problem on each. :func:`numpy.linalg.lstsq` is used so that rank
deficient subsets still yield the orthogonal projection onto their span.
"""
import itertools
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .errors import CapExceededError, DimensionError
from .omp import SparseVector
from .sensing import DEFAULT_CAP, SensingMatrix

# the best l-term error is taken over supports of size at most l
SIGMA_DEFINITION = "min over |S| <= l of the least-squares residual norm of y on the columns S"


@dataclass(frozen=True)
class BestTermApproximation:
    l: int
    sigma: float
    best_support: Tuple[int, ...]
    supports_examined: int


def _check_y(phi, y):
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (phi.m,):
        raise DimensionError(f"y has shape {y.shape}, expected ({phi.m},)")
    return y


def _projection(phi, y, support):
    cols = phi.data[:, list(support)]
    coef, *_ = np.linalg.lstsq(cols, y, rcond=None)
    return coef, float(np.linalg.norm(y - cols @ coef))


def _enumerate(n, size, cap, what):
    count = math.comb(n, size)
    if count > cap:
        raise CapExceededError(f"{what} needs {count} supports of size {size} (cap {cap})", count, cap)
    return itertools.combinations(range(n), size)


def best_l_term_error(phi: SensingMatrix, y, l, cap=DEFAULT_CAP) -> BestTermApproximation:
    """Best approximation error of `y` by `l` columns of `phi`.

    Only supports of size exactly ``l`` and the empty support are examined:
    every smaller support is contained in one of size ``l`` whose span is at
    least as large.

    Parameters
    ----------
    phi: SensingMatrix
    y: array_like
    l: int
        Between 0 and ``min(M, N)``.
    cap: int, optional, default: DEFAULT_CAP

    Returns
    -------
    BestTermApproximation
        The first support (lexicographically) attaining the minimum wins ties.
    """
    y = _check_y(phi, y)
    if not 0 <= l <= min(phi.m, phi.n):
        raise ValueError(f"l must lie in [0, {min(phi.m, phi.n)}], got {l}")

    best_sigma, best_support, examined = float(np.linalg.norm(y)), (), 1
    if l == 0:
        return BestTermApproximation(0, best_sigma, best_support, examined)

    for support in _enumerate(phi.n, l, cap, "best_l_term_error"):
        examined += 1
        _, sigma = _projection(phi, y, support)
        if sigma < best_sigma:
            best_sigma, best_support = sigma, support
    return BestTermApproximation(l, best_sigma, tuple(best_support), examined)


def l0_decode_exhaustive(phi: SensingMatrix, y, K, tol, cap=DEFAULT_CAP) -> List[SparseVector]:
    """Every K-sparse ``z`` (one per support) with ``||y - phi z|| <= tol``.

    Exact zeros in a least-squares solution are dropped from the returned
    vector, so a representative may have fewer than `K` nonzeros.
    """
    y = _check_y(phi, y)
    if not 0 <= K <= min(phi.m, phi.n):
        raise ValueError(f"K must lie in [0, {min(phi.m, phi.n)}], got {K}")

    if K == 0:
        return [SparseVector.zero(phi.n)] if np.linalg.norm(y) <= tol else []

    solutions = []
    for support in _enumerate(phi.n, K, cap, "l0_decode_exhaustive"):
        coef, residual = _projection(phi, y, support)
        if residual <= tol:
            keep = [(i, c) for i, c in zip(support, coef.tolist()) if c != 0.0]
            solutions.append(SparseVector(phi.n, tuple(i for i, _ in keep), tuple(c for _, c in keep)))
    return solutions
