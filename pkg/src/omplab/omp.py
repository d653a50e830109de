"""Orthogonal Matching Pursuit with a complete per-iteration trace.

The loop is the textbook one: start from ``r = y``, ``x = 0`` and an empty
support; pick the column most correlated with the residual, add it to the
support, re-fit ``y`` by least squares on the whole support and recompute the
residual; stop once the residual vanishes.

Every step is recorded in an :class:`OmpTrace` so that iterates, residuals and
error vectors of any step can be recomputed afterwards.
"""
import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, IllConditionedError, ResultIOError
from .linalg import SupportFactorization, as_vector, extend_factorization
from .sensing import SensingMatrix

RESIDUAL_ZERO = "residual-zero"
MAX_ITERATIONS = "max-iterations"
ILL_CONDITIONED = "ill-conditioned"

# default stopping tolerance relative to ||y||
DEFAULT_RELATIVE_TOL = 1e-10

TRACE_FORMAT = "omplab-trace v1"


@dataclass(frozen=True)
class SparseVector:
    """A length-`n` vector given by its support and the values on it.

    The support is kept sorted; values are reordered to match.
    """
    n: int
    support: Tuple[int, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        if len(self.support) != len(self.values):
            raise DimensionError(
                f"Support has {len(self.support)} indices but {len(self.values)} values were given")
        order = np.argsort(np.asarray(self.support, dtype=np.intp), kind="stable")
        support = tuple(int(self.support[i]) for i in order)
        values = tuple(float(self.values[i]) for i in order)
        if len(set(support)) != len(support):
            raise ValueError(f"Support indices must be distinct: {list(support)}")
        if any(not 0 <= i < self.n for i in support):
            raise ValueError(f"Support indices must lie in [0, {self.n}): {list(support)}")
        if any(v == 0.0 or not np.isfinite(v) for v in values):
            raise ValueError("Values on the support must be finite and nonzero")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_dense(cls, x):
        x = np.asarray(x, dtype=np.float64)
        idx = np.flatnonzero(x)
        return cls(x.shape[0], tuple(idx.tolist()), tuple(x[idx].tolist()))

    @classmethod
    def zero(cls, n):
        return cls(n, (), ())

    @property
    def k(self) -> int:
        return len(self.support)

    def dense(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[list(self.support)] = self.values
        return x

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)))


@dataclass(frozen=True)
class StopRule:
    """When to stop the OMP loop.

    Parameters
    ----------
    residual_tol: float, optional, default: None
        Absolute bound on ``||r||``. ``None`` means ``1e-10 * ||y||``.
    max_iterations: int, optional, default: None
        ``None`` means ``M``; may not exceed ``M``.
    """
    residual_tol: Optional[float] = None
    max_iterations: Optional[int] = None

    def resolve(self, y, m) -> Tuple[float, int]:
        tol = DEFAULT_RELATIVE_TOL * float(np.linalg.norm(y)) if self.residual_tol is None else self.residual_tol
        if tol < 0:
            raise ValueError(f"residual_tol must be non-negative, got {tol}")
        max_it = m if self.max_iterations is None else self.max_iterations
        if not 1 <= max_it <= m:
            raise ValueError(f"max_iterations must lie in [1, {m}], got {max_it}")
        return tol, max_it


@dataclass(frozen=True)
class OmpTraceStep:
    """One executed iteration.

    ``correlations`` holds ``|<r, phi_i>|`` for the residual the step selected
    from; ``support``/``coefficients`` describe the iterate after the step and
    ``residual_norm`` its residual.
    """
    l: int
    selected_index: int
    correlations: np.ndarray = field(repr=False)
    support: Tuple[int, ...]
    coefficients: np.ndarray = field(repr=False)
    residual_norm: float


@dataclass
class OmpTrace:
    phi: SensingMatrix = field(repr=False)
    y: np.ndarray = field(repr=False)
    residual_tol: float
    max_iterations: int
    steps: List[OmpTraceStep] = field(default_factory=list)
    termination: Optional[str] = None

    @property
    def final_support(self) -> Tuple[int, ...]:
        return self.steps[-1].support if self.steps else ()

    def __len__(self):
        return len(self.steps)


def select_next_index(phi: SensingMatrix, r, support: Sequence[int] = ()) -> Tuple[int, np.ndarray]:
    """Column with the largest ``|<r, phi_i>|`` over all columns, smallest index on ties.

    Columns already in `support` are not excluded: after a least-squares fit
    their correlation with the residual vanishes, so a fresh index is chosen
    whenever ``r`` is nonzero.

    Returns
    -------
    tuple
        ``(index, magnitudes)``

    Raises
    ------
    ValueError
        If `r` is zero.
    IllConditionedError
        If the maximum lands on a column of `support`, i.e. the residual is
        numerically orthogonal to every column.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (phi.m,):
        raise DimensionError(f"Residual has shape {r.shape}, expected ({phi.m},)")
    if not np.any(r):
        raise ValueError("Residual is zero; the pursuit has already converged")
    magnitudes = np.abs(phi.data.T @ r)
    index = int(np.argmax(magnitudes))
    if index in support:
        raise IllConditionedError(
            f"Largest correlation is on already selected column {index}", tuple(support) + (index,))
    return index, magnitudes


def omp_solve(phi: SensingMatrix, y, stop: StopRule = None, verbose=0) -> OmpTrace:
    """Run Orthogonal Matching Pursuit on ``y`` and record every step.

    Parameters
    ----------
    phi: SensingMatrix
    y: array_like
        Measurement vector of length M.
    stop: StopRule, optional, default: None
        Defaults to ``StopRule()``.
    verbose: int, optional, default: 0
        ``verbose > 0`` prints one line per iteration.

    Returns
    -------
    OmpTrace
        ``termination`` is one of `RESIDUAL_ZERO`, `MAX_ITERATIONS`,
        `ILL_CONDITIONED`; an ill-conditioned extension ends the run instead of
        raising.
    """
    y = as_vector(y)
    if y.shape[0] != phi.m:
        raise DimensionError(f"y has length {y.shape[0]}, matrix has {phi.m} rows")
    if stop is None:
        stop = StopRule()
    tol, max_it = stop.resolve(y, phi.m)

    trace = OmpTrace(phi, y, tol, max_it)
    f = SupportFactorization.empty(phi.data)
    r = y
    r_norm = float(np.linalg.norm(r))

    while True:
        if r_norm <= tol:
            trace.termination = RESIDUAL_ZERO
            break
        if len(trace.steps) >= max_it:
            trace.termination = MAX_ITERATIONS
            break
        try:
            index, magnitudes = select_next_index(phi, r, f.support)
            f = extend_factorization(f, index, y)
        except IllConditionedError as e:
            if verbose > 0:
                print(f"omplab: stopping after {len(trace.steps)} steps: {e}")
            trace.termination = ILL_CONDITIONED
            break

        coef = f.coefficients()
        r = y - phi.data[:, list(f.support)] @ coef
        r_norm = float(np.linalg.norm(r))
        trace.steps.append(OmpTraceStep(
            l=len(trace.steps) + 1,
            selected_index=index,
            correlations=magnitudes,
            support=f.support,
            coefficients=coef,
            residual_norm=r_norm))

        if verbose > 0:
            print(f"omplab: step {len(trace.steps)} selected {index}, ||r|| = {r_norm:.3e}")

    return trace


def _check_step(trace, at_step):
    if not 0 <= at_step <= len(trace.steps):
        raise IndexError(f"Step {at_step} out of range; the trace has {len(trace.steps)} steps")


def reconstruct(trace: OmpTrace, at_step) -> np.ndarray:
    """Dense iterate ``x^l`` after `at_step` steps (the zero vector at step 0)."""
    _check_step(trace, at_step)
    x = np.zeros(trace.phi.n)
    if at_step > 0:
        step = trace.steps[at_step - 1]
        x[list(step.support)] = step.coefficients
    return x


def residual_at(trace: OmpTrace, at_step) -> np.ndarray:
    """Residual ``r^l = y - phi x^l`` recomputed from the stored iterate."""
    return trace.y - trace.phi.data @ reconstruct(trace, at_step)


def error_vector(trace: OmpTrace, x: SparseVector, at_step) -> np.ndarray:
    """``z^l = x - x^l``; when ``y = phi x`` it satisfies ``phi z^l = r^l``."""
    if x.n != trace.phi.n:
        raise DimensionError(f"Signal has dimension {x.n}, matrix has {trace.phi.n} columns")
    return x.dense() - reconstruct(trace, at_step)


def support_energy(x: SparseVector, V) -> float:
    """Sum of ``x_i^2`` over ``i`` in `V`."""
    V = set(int(i) for i in V)
    return float(sum(v * v for i, v in zip(x.support, x.values) if i in V))


def trace_records(trace: OmpTrace) -> List[dict]:
    return [
        {
            "l": step.l,
            "selected_index": step.selected_index,
            "residual_norm": step.residual_norm,
            "support": sorted(step.support),
        }
        for step in trace.steps
    ]


def format_trace(trace: OmpTrace) -> str:
    """Trace document: one JSON record per line after a format header."""
    lines = [json.dumps({"format": TRACE_FORMAT, "m": trace.phi.m, "n": trace.phi.n,
                         "termination": trace.termination, "steps": len(trace.steps)})]
    lines.extend(json.dumps(record) for record in trace_records(trace))
    return "\n".join(lines) + "\n"


def export_trace(trace: OmpTrace, path):
    try:
        with open(path, "w") as f:
            f.write(format_trace(trace))
    except OSError as e:
        raise ResultIOError(f"Cannot write trace to {path}: {e}", path) from e
