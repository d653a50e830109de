"""Sensing-matrix ensembles, coherence and restricted isometry constants.

Random streams come from numpy's PCG64 generator. Seeds for sub-tasks are
derived with :func:`derive_seed`, which feeds the master seed and a tuple of
non-negative integer keys through :class:`numpy.random.SeedSequence` and takes
the first 64-bit word of the resulting state. The same keys always give the
same seed, on any machine and under any parallel schedule.
"""
import dataclasses
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import CapExceededError, DimensionError, FormatError, ResultIOError
from .linalg import as_matrix

ENSEMBLES = ("bernoulli", "gaussian-normalized", "explicit")

EXHAUSTIVE = "exhaustive"
MONTE_CARLO = "monte-carlo"

DEFAULT_CAP = 10 ** 6

UNIT_NORM_TOLERANCE = 1e-12

MATRIX_FORMAT = "omplab-matrix v1"

# purpose tags for derive_seed
PURPOSE_MATRIX = 1
PURPOSE_SIGNAL = 2
PURPOSE_COHERENCE = 3
PURPOSE_RIP = 4

_EIG_CHUNK = 8192


def derive_seed(master_seed, *keys) -> int:
    """Derive a 64-bit seed from a master seed and integer keys.

    Parameters
    ----------
    master_seed: int
        Non-negative master seed.
    keys: int
        Non-negative integers identifying the stream (purpose tag, grid
        coordinates, trial index, ...).

    Returns
    -------
    int
    """
    state = np.random.SeedSequence([int(master_seed)] + [int(k) for k in keys]).generate_state(1, np.uint64)
    return int(state[0])


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class SensingMatrix:
    """An M x N measurement matrix with unit-norm columns.

    Parameters
    ----------
    data: array_like
        The matrix entries; validated and stored read-only.
    ensemble: str
        One of `ENSEMBLES`.
    seed: int, optional, default: None
        Generator seed for random ensembles.
    """
    data: np.ndarray = field(repr=False)
    ensemble: str = "explicit"
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "data", as_matrix(self.data))
        if self.ensemble not in ENSEMBLES:
            raise ValueError(f"Unknown ensemble: {self.ensemble}")
        norms = np.linalg.norm(self.data, axis=0)
        bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_TOLERANCE)
        if bad.size > 0:
            raise ValueError(
                f"Columns must have unit norm; column {int(bad[0])} has norm {norms[bad[0]]!r}")
        if self.m > self.n:
            warnings.warn(f"Sensing matrix has more rows than columns ({self.m} > {self.n})")

    @classmethod
    def explicit(cls, a, normalize=False):
        """Wrap a hand-built matrix, optionally rescaling its columns to unit norm."""
        a = np.array(a, dtype=np.float64)
        if normalize:
            norms = np.linalg.norm(a, axis=0)
            if np.any(norms == 0):
                raise ValueError("Cannot normalize a zero column")
            a = a / norms
        return cls(a, "explicit", None)

    @property
    def m(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class CoherenceReport:
    mu: float
    pair: Tuple[int, int]


@dataclass(frozen=True)
class RipEstimate:
    """Restricted isometry constant of a given order.

    An ``exhaustive`` estimate is exact; a ``monte-carlo`` estimate is a lower
    bound on the true constant.
    """
    order: int
    delta: float
    method: str
    subsets_examined: int
    seed: Optional[int] = None

    @property
    def exact(self) -> bool:
        return self.method == EXHAUSTIVE


@dataclass(frozen=True)
class TheoremConstants:
    """Constants of the RIP + coherence recovery guarantee.

    ``C`` scales the required RIP order and iteration count, ``c`` the required
    isometry constant. Override them only for exploration; `overrides` lists
    what differs from the defaults so outputs can record it.
    """
    C: float = 2e5
    c: float = 1e-6

    def delta_of_K(self, K) -> float:
        return self.c * K ** -0.2

    def rip_order_of_K(self, K) -> int:
        return int(math.floor(self.C * K ** 1.2))

    def coherence_bound_of_K(self, K) -> float:
        return 1.0 / (20.0 * K ** 0.8)

    def measurements_of_K(self, K, N, C_M=1.0) -> int:
        """Measurement count ``floor(C_M K^1.6 log N)`` sufficient for Bernoulli matrices."""
        return int(math.floor(C_M * K ** 1.6 * math.log(N)))

    def overrides(self) -> dict:
        defaults = TheoremConstants()
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)
                if getattr(self, f.name) != getattr(defaults, f.name)}


@dataclass(frozen=True)
class Theorem1Hypotheses:
    """Which hypotheses of the RIP + coherence recovery guarantee can be checked, and whether they hold.

    ``feasible`` is ``"yes"`` when both were evaluated exactly, ``"partial"``
    when the RIP constant is only a monte-carlo lower bound and
    ``"infeasible"`` when the required RIP order exceeds ``min(M, N)``.
    ``rip_holds`` is ``None`` whenever the data cannot decide it.
    """
    K: int
    constants: TheoremConstants
    rip_order_required: int
    delta_required: float
    delta_measured: Optional[RipEstimate]
    mu_required: float
    mu_measured: float
    coherence_holds: bool
    rip_holds: Optional[bool]
    feasible: str
    notes: List[str] = field(default_factory=list)


def _check_dims(M, N):
    if int(M) != M or int(N) != N:
        raise ValueError(f"Dimensions must be integers, got M={M}, N={N}")
    if M < 1 or M > N:
        raise ValueError(f"Generated ensembles need 1 <= M <= N, got M={M}, N={N}")


def gen_bernoulli(M, N, seed) -> SensingMatrix:
    """Random matrix with independent entries +-M^(-1/2), each with probability 1/2."""
    _check_dims(M, N)
    rng = make_rng(seed)
    signs = rng.integers(0, 2, size=(M, N)) * 2 - 1
    return SensingMatrix(signs * (1.0 / np.sqrt(M)), "bernoulli", int(seed))


def gen_gaussian_normalized(M, N, seed) -> SensingMatrix:
    """I.i.d. standard normal entries with every column rescaled to unit norm."""
    _check_dims(M, N)
    rng = make_rng(seed)
    a = rng.standard_normal((M, N))
    a /= np.linalg.norm(a, axis=0)
    return SensingMatrix(a, "gaussian-normalized", int(seed))


def generate(ensemble, M, N, seed) -> SensingMatrix:
    if ensemble == "bernoulli":
        return gen_bernoulli(M, N, seed)
    elif ensemble == "gaussian-normalized":
        return gen_gaussian_normalized(M, N, seed)
    else:
        raise ValueError(f"Cannot generate ensemble: {ensemble}")


def coherence(phi: SensingMatrix) -> CoherenceReport:
    """Largest absolute inner product between two distinct columns.

    Ties go to the first pair in row-major order of ``(i, j)``, ``i < j``.
    """
    if phi.n < 2:
        raise ValueError(f"Coherence needs at least two columns, got {phi.n}")
    gram = np.abs(phi.data.T @ phi.data)
    iu, ju = np.triu_indices(phi.n, 1)
    values = gram[iu, ju]
    best = int(np.argmax(values))
    return CoherenceReport(float(values[best]), (int(iu[best]), int(ju[best])))


def _max_subset_statistic(gram, subsets) -> float:
    """max over subsets of max(lambda_max - 1, 1 - lambda_min) of the Gram block."""
    subsets = np.asarray(subsets, dtype=np.intp)
    blocks = gram[subsets[:, :, None], subsets[:, None, :]]
    eig = np.linalg.eigvalsh(blocks)
    stat = np.maximum(eig[:, -1] - 1.0, 1.0 - eig[:, 0])
    return float(stat.max())


def _check_order(phi, order):
    if not 1 <= order <= min(phi.m, phi.n):
        raise ValueError(f"RIP order must lie in [1, {min(phi.m, phi.n)}], got {order}")


def rip_delta_exhaustive(phi: SensingMatrix, order, cap=DEFAULT_CAP) -> RipEstimate:
    """Exact RIP constant of `order` by enumerating every column subset.

    Raises
    ------
    CapExceededError
        If ``C(N, order)`` exceeds `cap`.
    """
    _check_order(phi, order)
    count = math.comb(phi.n, order)
    if count > cap:
        raise CapExceededError(
            f"Exhaustive RIP of order {order} needs {count} subsets (cap {cap}); "
            "use rip_delta_monte_carlo for a lower bound", count, cap)

    gram = phi.data.T @ phi.data
    combos = itertools.combinations(range(phi.n), order)
    delta = 0.0
    while True:
        chunk = list(itertools.islice(combos, _EIG_CHUNK))
        if not chunk:
            break
        delta = max(delta, _max_subset_statistic(gram, chunk))
    return RipEstimate(order, delta, EXHAUSTIVE, count, None)


def rip_delta_monte_carlo(phi: SensingMatrix, order, trials, seed) -> RipEstimate:
    """Lower bound on the RIP constant from `trials` random column subsets.

    When `trials` covers ``C(N, order)`` the subsets are enumerated instead and
    the exact (exhaustive) estimate is returned.
    """
    _check_order(phi, order)
    if trials < 1:
        raise ValueError(f"Need at least one trial, got {trials}")
    if trials >= math.comb(phi.n, order):
        return rip_delta_exhaustive(phi, order, cap=trials)

    rng = make_rng(seed)
    subsets = np.array([np.sort(rng.choice(phi.n, order, replace=False)) for _ in range(trials)])
    gram = phi.data.T @ phi.data
    delta = 0.0
    for start in range(0, trials, _EIG_CHUNK):
        delta = max(delta, _max_subset_statistic(gram, subsets[start:start + _EIG_CHUNK]))
    return RipEstimate(order, delta, MONTE_CARLO, int(trials), int(seed))


def theorem1_hypotheses(phi: SensingMatrix, K, constants=None, cap=DEFAULT_CAP,
                        mc_trials=1000, seed=0) -> Theorem1Hypotheses:
    """Evaluate the RIP and coherence hypotheses of the recovery guarantee for sparsity `K`.

    Infeasibility is reported, never raised.

    Parameters
    ----------
    phi: SensingMatrix
    K: int
        Sparsity level, at least 1.
    constants: TheoremConstants, optional, default: None
        Defaults to `TheoremConstants()`.
    cap: int, optional, default: DEFAULT_CAP
        Largest subset count evaluated exhaustively.
    mc_trials: int, optional, default: 1000
        Subsets sampled when the exhaustive count exceeds `cap`.
    seed: int, optional, default: 0
        Seed of the monte-carlo sampler.

    Returns
    -------
    Theorem1Hypotheses
    """
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    if constants is None:
        constants = TheoremConstants()

    order = constants.rip_order_of_K(K)
    delta_required = constants.delta_of_K(K)
    mu_required = constants.coherence_bound_of_K(K)
    mu_measured = coherence(phi).mu if phi.n >= 2 else 0.0
    notes = []
    if constants.overrides():
        notes.append(f"constants overridden: {constants.overrides()}")

    if order < 1 or order > min(phi.m, phi.n):
        notes.append(f"required RIP order {order} exceeds min(M, N) = {min(phi.m, phi.n)}; "
                     "the RIP hypothesis cannot be evaluated at this size")
        estimate, rip_holds, feasible = None, None, "infeasible"
    elif math.comb(phi.n, order) <= cap:
        estimate = rip_delta_exhaustive(phi, order, cap)
        rip_holds = estimate.delta <= delta_required
        feasible = "yes"
    else:
        estimate = rip_delta_monte_carlo(phi, order, mc_trials, seed)
        # a lower bound can only refute the hypothesis
        rip_holds = False if estimate.delta > delta_required else None
        feasible = "partial"
        notes.append(f"C(N, {order}) exceeds cap {cap}; measured delta is a monte-carlo lower bound")

    return Theorem1Hypotheses(
        K=K,
        constants=constants,
        rip_order_required=order,
        delta_required=delta_required,
        delta_measured=estimate,
        mu_required=mu_required,
        mu_measured=mu_measured,
        coherence_holds=mu_measured <= mu_required,
        rip_holds=rip_holds,
        feasible=feasible,
        notes=notes)


def write_matrix(phi: SensingMatrix, path):
    """Write `phi` in the "omplab-matrix v1" text format (17 significant digits)."""
    lines = [
        f"format-version: {MATRIX_FORMAT}",
        f"m: {phi.m}",
        f"n: {phi.n}",
        f"ensemble: {phi.ensemble}",
        f"seed: {'none' if phi.seed is None else phi.seed}",
        "---",
    ]
    lines.extend(" ".join(format(v, ".17g") for v in row) for row in phi.data)
    try:
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise ResultIOError(f"Cannot write matrix to {path}: {e}", path) from e


def read_matrix(path) -> SensingMatrix:
    """Read a matrix written by `write_matrix`."""
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ResultIOError(f"Cannot read matrix from {path}: {e}", path) from e

    head, sep, body = text.partition("\n---\n")
    if not sep:
        raise FormatError(f"{path}: missing '---' separator between header and body")
    header = {}
    for line in head.splitlines():
        key, colon, value = line.partition(":")
        if not colon:
            raise FormatError(f"{path}: malformed header line {line!r}")
        header[key.strip()] = value.strip()

    if header.get("format-version") != MATRIX_FORMAT:
        raise FormatError(f"{path}: unsupported format {header.get('format-version')!r}")
    try:
        m, n = int(header["m"]), int(header["n"])
        seed = None if header.get("seed", "none") == "none" else int(header["seed"])
        ensemble = header["ensemble"]
        rows = [[float(v) for v in line.split()] for line in body.splitlines() if line.strip()]
    except (KeyError, ValueError) as e:
        raise FormatError(f"{path}: {e}") from e

    data = np.array(rows, dtype=np.float64)
    if data.shape != (m, n):
        raise FormatError(f"{path}: header says {m}x{n} but body is {data.shape}")
    try:
        return SensingMatrix(data, ensemble, seed)
    except (ValueError, DimensionError) as e:
        raise FormatError(f"{path}: {e}") from e
