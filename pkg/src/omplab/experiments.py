"""Seeded Monte Carlo experiments: recovery grids, scaling fits and concentration studies.

Every random object is generated from a seed derived from the master seed and
the coordinates of the task it belongs to (see :func:`omplab.sensing.derive_seed`):

=========================  =============================================
trial seed                 ``derive_seed(master, M, K, trial)``
matrix seed                ``derive_seed(trial seed, PURPOSE_MATRIX)``
signal seed                ``derive_seed(trial seed, PURPOSE_SIGNAL)``
cell seed (CSV ``seed``)   ``derive_seed(master, M, K)``
=========================  =============================================

Trials are independent tasks mapped over a :class:`multiprocessing.Pool` in a
fixed order, so results do not depend on the number of workers.
"""
import itertools
import json
import math
import multiprocessing
import warnings
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.stats

from .analysis import (COHERENCE_CONDITION, LEMMA_1A, LEMMA_1B, LEMMA_2, LEMMA_3, THEOREM_A,
                       THEOREM_B, CheckReport, check_theorem_A, check_theorem_B, coherence_condition,
                       format_report, merge_reports, sweep_lemmas, verify_recovery)
from .errors import FormatError, ResultIOError
from .omp import SparseVector, StopRule, omp_solve, reconstruct
from .oracles import l0_decode_exhaustive
from .sensing import (DEFAULT_CAP, PURPOSE_COHERENCE, PURPOSE_MATRIX, PURPOSE_RIP, PURPOSE_SIGNAL,
                      SensingMatrix, TheoremConstants, coherence, derive_seed, gen_bernoulli, generate,
                      make_rng, rip_delta_exhaustive, rip_delta_monte_carlo)

UNIT_VALUES = "unit-values"
GAUSSIAN_VALUES = "gaussian-values"
DECAYING_VALUES = "decaying-values"
SIGNAL_MODELS = (UNIT_VALUES, GAUSSIAN_VALUES, DECAYING_VALUES)

GRID_ENSEMBLES = ("bernoulli", "gaussian-normalized")

GRID_COLUMNS = ["m", "k", "trials", "successes", "success_rate", "mean_iters", "mean_rel_err", "seed"]

DEFAULT_THRESHOLD = 0.9

COHERENCE_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)

# exponents of K in the measurement count: conjectured lower bound and sufficient scaling
REFERENCE_EXPONENTS = (1.5, 1.6)

SCALING_FORMAT = "omplab-scaling v1"
COHERENCE_FORMAT = "omplab-coherence v1"
RIP_FORMAT = "omplab-rip v1"
SUITE_FORMAT = "omplab-suite v1"

LEMMAS = "lemmas"
ORACLE = "oracle"
SUITE_CLAIMS = (THEOREM_A, THEOREM_B, LEMMAS, COHERENCE_CONDITION, ORACLE)


@dataclass(frozen=True)
class GridConfig:
    """Parameters of a recovery-probability grid over ``(M, K)`` at fixed ``N``.

    Parameters
    ----------
    n: int
    m_values: sequence of int
        Each between 1 and `n`.
    k_values: sequence of int
        Each between 0 and ``min(m_values)``.
    trials_per_cell: int
    ensemble: str, optional, default: "bernoulli"
    master_seed: int, optional, default: 0
    signal_model: str, optional, default: "unit-values"
        One of `SIGNAL_MODELS`.
    success_tol: float, optional, default: 1e-8
        Relative error below which a trial counts as recovered.
    """
    n: int
    m_values: Tuple[int, ...]
    k_values: Tuple[int, ...]
    trials_per_cell: int
    ensemble: str = "bernoulli"
    master_seed: int = 0
    signal_model: str = UNIT_VALUES
    success_tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "m_values", tuple(int(m) for m in self.m_values))
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))

    def validate(self):
        if not self.m_values or not self.k_values:
            raise ValueError("Grid needs at least one M and one K value")
        if any(not 1 <= m <= self.n for m in self.m_values):
            raise ValueError(f"All M values must lie in [1, N={self.n}], got {list(self.m_values)}")
        if any(not 0 <= k <= min(self.m_values) for k in self.k_values):
            raise ValueError(f"All K values must lie in [0, min(M)={min(self.m_values)}], "
                             f"got {list(self.k_values)}")
        if self.trials_per_cell < 1:
            raise ValueError(f"trials_per_cell must be at least 1, got {self.trials_per_cell}")
        if self.ensemble not in GRID_ENSEMBLES:
            raise ValueError(f"Grid ensemble must be one of {GRID_ENSEMBLES}, got {self.ensemble}")
        if self.signal_model not in SIGNAL_MODELS:
            raise ValueError(f"Unknown signal model: {self.signal_model}")
        if self.success_tol < 0:
            raise ValueError(f"success_tol must be non-negative, got {self.success_tol}")
        if self.master_seed < 0:
            raise ValueError(f"master_seed must be non-negative, got {self.master_seed}")


@dataclass(frozen=True)
class TrialOutcome:
    m: int
    k: int
    trial: int
    seed: int
    success: bool
    iterations: int
    iterations_to_recovery: Optional[int]
    relative_error: float
    mu: float


@dataclass(frozen=True)
class GridCell:
    m: int
    k: int
    trials: int
    successes: int
    mean_iters: float
    mean_rel_err: float
    seed: int

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials


@dataclass
class GridResult:
    config: Optional[GridConfig]
    cells: Dict[Tuple[int, int], GridCell] = field(default_factory=dict)
    outcomes: List[TrialOutcome] = field(default_factory=list)

    @property
    def m_values(self) -> List[int]:
        return sorted({m for m, _ in self.cells})

    @property
    def k_values(self) -> List[int]:
        return sorted({k for _, k in self.cells})


@dataclass(frozen=True)
class ScalingFit:
    """Fit of ``log M* = log a + alpha log K + log log N``.

    ``critical_m`` holds the (isotonically corrected) smallest M per K reaching
    `threshold`; ``excluded`` lists K values whose M* is not bracketed by the grid.
    """
    threshold: float
    n: int
    critical_m: Dict[int, int]
    excluded: Tuple[int, ...]
    alpha: float
    a: float
    residual: float
    isotonic_applied: bool
    references: Tuple[float, ...] = REFERENCE_EXPONENTS


@dataclass(frozen=True)
class CoherenceStudy:
    m: int
    n: int
    samples: int
    seed: int
    mu_values: Tuple[float, ...]
    quantiles: Dict[float, float]
    c_mu: float


@dataclass(frozen=True)
class RipStudy:
    m: int
    n: int
    order: int
    samples: int
    trials: int
    seed: int
    deltas: Tuple[float, ...]
    exact: bool
    implied_c: Tuple[float, ...]


@dataclass(frozen=True)
class SuiteConfig:
    """A seeded multi-instance run of one claim check.

    Trials cycle through the cross product of `k_values` and `signal_models`
    (see `trial_layout`), so every ``(K, model)`` pair occurs once `trials`
    reaches their number. `constants` feed the lemma sweeps.
    """
    claim: str
    m: int
    n: int
    k_values: Tuple[int, ...]
    trials: int
    master_seed: int = 0
    ensemble: str = "bernoulli"
    signal_models: Tuple[str, ...] = SIGNAL_MODELS
    l_max: int = 3
    p_max: int = 2
    max_rip_order: int = 8
    cap: int = DEFAULT_CAP
    success_tol: float = 1e-8
    enforce_hypotheses: bool = True
    constants: TheoremConstants = field(default_factory=TheoremConstants)

    def __post_init__(self):
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        object.__setattr__(self, "signal_models", tuple(self.signal_models))

    def trial_layout(self, i) -> Tuple[int, str]:
        """``(K, signal model)`` of trial `i`."""
        pairs = list(itertools.product(self.k_values, self.signal_models))
        return pairs[i % len(pairs)]

    def validate(self):
        if self.claim not in SUITE_CLAIMS:
            raise ValueError(f"Unknown claim {self.claim}; expected one of {SUITE_CLAIMS}")
        if not 1 <= self.m <= self.n:
            raise ValueError(f"Need 1 <= M <= N, got M={self.m}, N={self.n}")
        if not self.k_values or any(not 0 <= k <= self.m for k in self.k_values):
            raise ValueError(f"K values must lie in [0, M={self.m}], got {list(self.k_values)}")
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}")
        if not self.signal_models or any(s not in SIGNAL_MODELS for s in self.signal_models):
            raise ValueError(f"Unknown signal models: {list(self.signal_models)}")
        if self.ensemble not in GRID_ENSEMBLES:
            raise ValueError(f"Suite ensemble must be one of {GRID_ENSEMBLES}, got {self.ensemble}")


@dataclass
class SuiteResult:
    config: SuiteConfig
    reports: Dict[str, CheckReport]
    instances: int
    vacuous: int
    extras: dict = field(default_factory=dict)
    # claim -> trials that checked no instance of it
    vacuous_by_claim: Dict[str, int] = field(default_factory=dict)

    @property
    def violations(self) -> int:
        return sum(len(r.violations) for r in self.reports.values())

    @property
    def passed(self) -> bool:
        return self.violations == 0


def plant_signal(n, k, model, rng) -> SparseVector:
    """Draw a K-sparse signal with a uniformly random support.

    ``unit-values`` are random signs, ``gaussian-values`` standard normals
    (exact zeros redrawn) and ``decaying-values`` random signs times ``2^-j`` on
    the ``j``-th smallest support index (``j`` from 0).
    """
    if not 0 <= k <= n:
        raise ValueError(f"K must lie in [0, {n}], got {k}")
    support = np.sort(rng.choice(n, size=k, replace=False))
    if model == UNIT_VALUES:
        values = rng.choice([-1.0, 1.0], size=k)
    elif model == GAUSSIAN_VALUES:
        values = rng.standard_normal(k)
        while np.any(values == 0.0):
            zeros = values == 0.0
            values[zeros] = rng.standard_normal(int(zeros.sum()))
    elif model == DECAYING_VALUES:
        values = rng.choice([-1.0, 1.0], size=k) * 2.0 ** -np.arange(k)
    else:
        raise ValueError(f"Unknown signal model: {model}")
    return SparseVector(n, tuple(support.tolist()), tuple(values.tolist()))


def iterations_to_recovery(trace, x: SparseVector, tol) -> Optional[int]:
    """Smallest ``l`` whose iterate covers ``supp x`` with relative error at most `tol`."""
    x_dense = x.dense()
    scale = max(float(np.linalg.norm(x_dense)), np.finfo(float).tiny)
    target = set(x.support)
    for l in range(len(trace.steps) + 1):
        support = trace.steps[l - 1].support if l > 0 else ()
        if not target <= set(support):
            continue
        if float(np.linalg.norm(reconstruct(trace, l) - x_dense)) / scale <= tol:
            return l
    return None


def _trial_instance(master_seed, ensemble, signal_model, m, n, k, trial):
    seed = derive_seed(master_seed, m, k, trial)
    phi = generate(ensemble, m, n, derive_seed(seed, PURPOSE_MATRIX))
    x = plant_signal(n, k, signal_model, make_rng(derive_seed(seed, PURPOSE_SIGNAL)))
    return seed, phi, x


def _run_trial(task) -> TrialOutcome:
    config, m, k, trial = task
    seed, phi, x = _trial_instance(config.master_seed, config.ensemble, config.signal_model,
                                   m, config.n, k, trial)
    trace = omp_solve(phi, phi.data @ x.dense(), StopRule(max_iterations=m))
    report = verify_recovery(trace, x, config.success_tol)
    mu = coherence(phi).mu if phi.n >= 2 else 0.0
    return TrialOutcome(m, k, trial, seed, report.success, report.iterations_used,
                        iterations_to_recovery(trace, x, config.success_tol), report.relative_error, mu)


def _aggregate(config, outcomes) -> Dict[Tuple[int, int], GridCell]:
    groups = {}
    for o in outcomes:
        groups.setdefault((o.m, o.k), []).append(o)
    cells = {}
    for (m, k), group in groups.items():
        recovered = [o.iterations_to_recovery for o in group if o.success]
        cells[(m, k)] = GridCell(
            m=m,
            k=k,
            trials=len(group),
            successes=len(recovered),
            mean_iters=float(np.mean(recovered)) if recovered else math.nan,
            mean_rel_err=float(np.mean([o.relative_error for o in group])),
            seed=derive_seed(config.master_seed, m, k))
    return cells


def run_recovery_grid(config: GridConfig, workers=1, verbose=0) -> GridResult:
    """Estimate the OMP recovery probability on every ``(M, K)`` cell of the grid.

    Parameters
    ----------
    config: GridConfig
    workers: int, optional, default: 1
        Number of worker processes; the result is identical for any value.
    verbose: int, optional, default: 0
        ``verbose > 0`` prints one line per cell.

    Returns
    -------
    GridResult
    """
    config.validate()
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")
    tasks = [(config, m, k, t) for m in config.m_values for k in config.k_values
             for t in range(config.trials_per_cell)]

    if workers == 1:
        outcomes = [_run_trial(task) for task in tasks]
    else:
        with multiprocessing.Pool(processes=workers) as pool:
            outcomes = pool.map(_run_trial, tasks, chunksize=max(1, len(tasks) // (4 * workers)))

    cells = _aggregate(config, outcomes)
    if verbose > 0:
        for cell in cells.values():
            print(f"omplab: M={cell.m} K={cell.k}: {cell.successes}/{cell.trials} recovered")
    return GridResult(config, cells, outcomes)


def monotonicity_violations(result: GridResult, confidence=0.99) -> List[dict]:
    """Pairs ``K < K'`` at fixed M whose success rate increases beyond binomial noise.

    Two cells conflict only when the exact two-sided `confidence` interval of the
    larger K lies entirely above the interval of the smaller K.
    """
    def interval(cell):
        ci = scipy.stats.binomtest(cell.successes, cell.trials).proportion_ci(
            confidence_level=confidence, method="exact")
        return ci.low, ci.high

    violations = []
    for m in result.m_values:
        row = [result.cells[(m, k)] for k in result.k_values if (m, k) in result.cells]
        for i, low_k in enumerate(row):
            for high_k in row[i + 1:]:
                if high_k.success_rate <= low_k.success_rate:
                    continue
                if interval(high_k)[0] > interval(low_k)[1]:
                    violations.append({"m": m, "k_low": low_k.k, "k_high": high_k.k,
                                       "rate_low": low_k.success_rate, "rate_high": high_k.success_rate})
    return violations


def fit_measurement_scaling(result: GridResult, threshold=DEFAULT_THRESHOLD, n=None) -> ScalingFit:
    """Fit the exponent of K in the critical number of measurements.

    For every K > 0 the critical M* is the smallest grid M whose success rate
    reaches `threshold`; it is used only when some smaller M falls short of the
    threshold. M* is made non-decreasing in K by a running maximum.

    Parameters
    ----------
    result: GridResult
    threshold: float, optional, default: 0.9
    n: int, optional, default: None
        Signal dimension; defaults to ``result.config.n``.

    Returns
    -------
    ScalingFit
    """
    if n is None:
        if result.config is None:
            raise ValueError("Signal dimension N is unknown; pass n explicitly")
        n = result.config.n
    if n < 2:
        raise ValueError(f"N must be at least 2 for log log N, got {n}")

    critical, excluded = {}, []
    for k in result.k_values:
        if k == 0:
            continue
        rates = [(m, result.cells[(m, k)].success_rate) for m in result.m_values if (m, k) in result.cells]
        passing = [i for i, (_, rate) in enumerate(rates) if rate >= threshold]
        if not passing or passing[0] == 0:
            excluded.append(k)
        else:
            critical[k] = rates[passing[0]][0]

    if len(critical) < 3:
        raise ValueError(f"Need at least 3 values of K with a bracketed M*, got {sorted(critical)}")

    ks = sorted(critical)
    corrected = np.maximum.accumulate([critical[k] for k in ks])
    isotonic = any(int(c) != critical[k] for c, k in zip(corrected, ks))
    if isotonic:
        warnings.warn("Critical M is not monotone in K; applied a running-maximum correction")

    log_k = np.log(ks)
    target = np.log(corrected.astype(float)) - math.log(math.log(n))
    alpha, log_a = np.polyfit(log_k, target, 1)
    residual = float(np.linalg.norm(target - (alpha * log_k + log_a)))
    return ScalingFit(
        threshold=float(threshold),
        n=int(n),
        critical_m={k: int(c) for k, c in zip(ks, corrected)},
        excluded=tuple(excluded),
        alpha=float(alpha),
        a=float(math.exp(log_a)),
        residual=residual,
        isotonic_applied=isotonic)


def coherence_concentration_study(M, N, samples, seed) -> CoherenceStudy:
    """Coherence of `samples` Bernoulli matrices with the implied constant ``c_mu``.

    ``c_mu = q_0.95(mu) sqrt(M) / sqrt(log N)``.
    """
    if samples < 1:
        raise ValueError(f"Need at least one sample, got {samples}")
    if N < 2:
        raise ValueError(f"Coherence needs N >= 2, got {N}")
    mus = np.array([coherence(gen_bernoulli(M, N, derive_seed(seed, PURPOSE_COHERENCE, i))).mu
                    for i in range(samples)])
    quantiles = {q: float(np.quantile(mus, q)) for q in COHERENCE_QUANTILES}
    return CoherenceStudy(
        m=int(M), n=int(N), samples=int(samples), seed=int(seed),
        mu_values=tuple(mus.tolist()),
        quantiles=quantiles,
        c_mu=quantiles[0.95] * math.sqrt(M) / math.sqrt(math.log(N)))


def rip_concentration_study(M, N, order, samples, trials, seed) -> RipStudy:
    """Monte-carlo RIP constants of Bernoulli matrices.

    For each sample the implied constant ``M delta^2 / (order log(N / order))``
    is recorded; random matrices have RIP of order ``order`` with constant
    ``delta`` once M exceeds a constant times ``order log(N / order) / delta^2``.
    """
    if samples < 1:
        raise ValueError(f"Need at least one sample, got {samples}")
    if not 1 <= order < N:
        raise ValueError(f"order must lie in [1, N), got {order}")
    estimates = [
        rip_delta_monte_carlo(gen_bernoulli(M, N, derive_seed(seed, PURPOSE_RIP, i, 0)), order, trials,
                              derive_seed(seed, PURPOSE_RIP, i, 1))
        for i in range(samples)
    ]
    scale = order * math.log(N / order)
    return RipStudy(
        m=int(M), n=int(N), order=int(order), samples=int(samples), trials=int(trials), seed=int(seed),
        deltas=tuple(e.delta for e in estimates),
        exact=all(e.exact for e in estimates),
        implied_c=tuple(M * e.delta ** 2 / scale for e in estimates))


def _coherence_instance(report, instance_id, trace, x, tol):
    K = x.k
    rec = verify_recovery(trace, x, tol)
    report._add(instance_id, {"K": K, "quantity": "iterations"}, abs(len(trace.steps) - K), 0.0)
    report._add(instance_id, {"K": K, "quantity": "support-missed"}, 0.0 if rec.support_match else 1.0, 0.0)
    report._add(instance_id, {"K": K, "quantity": "relative-error"}, rec.relative_error, tol)


def run_claim_suite(config: SuiteConfig, phi: SensingMatrix = None, verbose=0) -> SuiteResult:
    """Run one claim check on `config.trials` seeded instances.

    Parameters
    ----------
    config: SuiteConfig
    phi: SensingMatrix, optional, default: None
        Use this matrix for every trial instead of generating one per trial.
    verbose: int, optional, default: 0

    Returns
    -------
    SuiteResult
        Instances where the claim says nothing (empty l-range, coherence
        condition not met, non-unique l0 solution) are counted in ``vacuous``,
        and per claim in ``vacuous_by_claim``.
    """
    config.validate()
    if phi is not None and phi.shape != (config.m, config.n):
        raise ValueError(f"Matrix shape {phi.shape} does not match M={config.m}, N={config.n}")

    if config.claim == LEMMAS:
        claims = (LEMMA_1A, LEMMA_1B, LEMMA_2, LEMMA_3)
    else:
        claims = (config.claim,)

    collected = {c: [] for c in claims}
    vacuous_by_claim = dict.fromkeys(claims, 0)
    vacuous = 0
    oracle_unique = oracle_success = 0
    for i in range(config.trials):
        K, model = config.trial_layout(i)
        seed, generated, x = _trial_instance(config.master_seed, config.ensemble, model,
                                             config.m, config.n, K, i)
        matrix = generated if phi is None else phi
        y = matrix.data @ x.dense()
        trace = omp_solve(matrix, y)
        instance_id = f"trial-{i}"

        trial_reports = {}
        if config.claim == THEOREM_A:
            trial_reports[THEOREM_A] = check_theorem_A(trace, x, instance_id)
        elif config.claim == THEOREM_B:
            mu = coherence(matrix).mu
            if not (mu > 0 and min(config.l_max, math.floor(1.0 / (20.0 * mu))) < 1):
                trial_reports[THEOREM_B] = check_theorem_B(trace, matrix, mu, config.l_max, config.cap,
                                                           instance_id)
        elif config.claim == LEMMAS:
            order = max(1, min(K + len(trace.steps), matrix.m, config.max_rip_order))
            delta = rip_delta_exhaustive(matrix, order, config.cap)
            trial_reports = sweep_lemmas(trace, matrix, x, delta, constants=config.constants, p_max=config.p_max,
                                         enforce_hypotheses=config.enforce_hypotheses, instance_id=instance_id)
        elif config.claim == COHERENCE_CONDITION:
            if K >= 1 and coherence_condition(coherence(matrix).mu, K):
                report = CheckReport(COHERENCE_CONDITION)
                _coherence_instance(report, instance_id, trace, x, config.success_tol)
                trial_reports[COHERENCE_CONDITION] = report
        elif config.claim == ORACLE:
            solutions = l0_decode_exhaustive(matrix, y, K, 1e-9 * max(1.0, float(np.linalg.norm(y))),
                                             config.cap)
            if len(solutions) == 1:
                oracle_unique += 1
                report = CheckReport(ORACLE)
                if verify_recovery(trace, x, config.success_tol).success:
                    oracle_success += 1
                    gap = float(np.linalg.norm(reconstruct(trace, len(trace.steps)) - solutions[0].dense()))
                    report._add(instance_id, {"K": K}, gap, 1e-8)
                trial_reports[ORACLE] = report

        checked_any = False
        for claim in claims:
            report = trial_reports.get(claim)
            if report is not None:
                collected[claim].append(report)
            # a unique l0 solution counts as checked even when OMP missed it
            if report is not None and (report.instances or claim == ORACLE):
                checked_any = True
            else:
                vacuous_by_claim[claim] += 1
        if not checked_any:
            vacuous += 1

        if verbose > 0:
            print(f"omplab: {config.claim} trial {i} (K={K}, {model}) done")

    reports = {c: merge_reports(collected[c], claim=c) for c in claims}

    extras = {}
    if config.claim == ORACLE:
        extras["unique_instances"] = oracle_unique
        extras["omp_success_rate"] = oracle_success / oracle_unique if oracle_unique else None
    return SuiteResult(config, reports, config.trials, vacuous, extras, vacuous_by_claim)


def _write_text(path, text, what):
    try:
        with open(path, "w") as f:
            f.write(text)
    except OSError as e:
        raise ResultIOError(f"Cannot write {what} to {path}: {e}", path) from e


def _read_json(path, fmt):
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise ResultIOError(f"Cannot read {path}: {e}", path) from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: not a JSON document: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != fmt:
        raise FormatError(f"{path}: expected format {fmt!r}")
    return doc


def grid_frame(result: GridResult) -> pd.DataFrame:
    """One row per cell, ordered by (M, K), with the CSV columns."""
    rows = [[c.m, c.k, c.trials, c.successes, c.success_rate, c.mean_iters, c.mean_rel_err, c.seed]
            for _, c in sorted(result.cells.items())]
    frame = pd.DataFrame(rows, columns=GRID_COLUMNS)
    frame["seed"] = frame["seed"].astype(object)
    return frame


def export_results(result, path):
    """Write a grid (CSV) or a fit, study or suite result (JSON document).

    Floats are written with 17 significant digits so reading them back gives
    the same values.
    """
    if isinstance(result, GridResult):
        try:
            grid_frame(result).to_csv(path, index=False, float_format="%.17g", na_rep="nan")
        except OSError as e:
            raise ResultIOError(f"Cannot write grid to {path}: {e}", path) from e
        return

    if isinstance(result, ScalingFit):
        doc = dict(asdict(result), format=SCALING_FORMAT)
        doc["critical_m"] = {str(k): m for k, m in result.critical_m.items()}
    elif isinstance(result, CoherenceStudy):
        doc = dict(asdict(result), format=COHERENCE_FORMAT)
        doc["quantiles"] = {repr(q): v for q, v in result.quantiles.items()}
    elif isinstance(result, RipStudy):
        doc = dict(asdict(result), format=RIP_FORMAT)
    elif isinstance(result, SuiteResult):
        doc = {
            "format": SUITE_FORMAT,
            "config": asdict(result.config),
            "instances": result.instances,
            "vacuous": result.vacuous,
            "vacuous_by_claim": result.vacuous_by_claim,
            "violations": result.violations,
            "extras": result.extras,
            "reports": [format_report(r) for r in result.reports.values()],
        }
    else:
        raise TypeError(f"Cannot export {type(result).__name__}")
    _write_text(path, json.dumps(doc, indent=2) + "\n", type(result).__name__)


def read_grid_csv(path, config: GridConfig = None) -> GridResult:
    """Read a grid CSV written by `export_results`; per-trial outcomes are not stored."""
    try:
        frame = pd.read_csv(path, dtype={"seed": str})
    except OSError as e:
        raise ResultIOError(f"Cannot read grid from {path}: {e}", path) from e
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FormatError(f"{path}: {e}") from e
    if list(frame.columns) != GRID_COLUMNS:
        raise FormatError(f"{path}: expected columns {GRID_COLUMNS}, got {list(frame.columns)}")

    cells = {}
    try:
        for row in frame.itertuples(index=False):
            cell = GridCell(int(row.m), int(row.k), int(row.trials), int(row.successes),
                            float(row.mean_iters), float(row.mean_rel_err), int(row.seed))
            cells[(cell.m, cell.k)] = cell
    except (TypeError, ValueError) as e:
        raise FormatError(f"{path}: {e}") from e
    return GridResult(config, cells, [])


def read_scaling_fit(path) -> ScalingFit:
    doc = _read_json(path, SCALING_FORMAT)
    try:
        return ScalingFit(
            threshold=doc["threshold"],
            n=doc["n"],
            critical_m={int(k): int(m) for k, m in doc["critical_m"].items()},
            excluded=tuple(doc["excluded"]),
            alpha=doc["alpha"],
            a=doc["a"],
            residual=doc["residual"],
            isotonic_applied=doc["isotonic_applied"],
            references=tuple(doc["references"]))
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: {e}") from e


def read_coherence_study(path) -> CoherenceStudy:
    doc = _read_json(path, COHERENCE_FORMAT)
    try:
        return CoherenceStudy(
            m=doc["m"], n=doc["n"], samples=doc["samples"], seed=doc["seed"],
            mu_values=tuple(doc["mu_values"]),
            quantiles={float(q): v for q, v in doc["quantiles"].items()},
            c_mu=doc["c_mu"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: {e}") from e
