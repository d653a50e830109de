"""Numerical checks of OMP convergence and recovery results on live traces.

Each ``check_*`` function evaluates one inequality on a solver trace and
returns a :class:`CheckReport` listing every evaluated instance with its left
and right hand side. An instance holds when ``lhs <= rhs + 1e-9 * (1 + |rhs|)``.

Claims
------
theorem-A
    ``||r^l|| <= |x|_1 / sqrt(l)`` for ``y = phi x`` and every ``l >= 1``.
theorem-B
    ``||r^{2l}|| <= 3 sigma_l(y)`` for ``1 <= l <= 1 / (20 mu)``.
lemma-1a, lemma-1b
    ``sum_{i in Lambda^l} (z^l_i)^2 <= 3 delta R(V_0 \\ Lambda^l)`` and
    ``R(V_0 \\ Lambda^l) <= (1 + 2 delta) ||r^l||^2``.
lemma-2
    ``||r^{l_k+p}||^2 <= R_k / p * (6 delta C K^1.2 + 2K)``.
lemma-3
    ``R(V_k \\ Lambda^{l_k+2p}) <= 10 R(V_k \\ W) + 30 delta R_k`` for
    ``W`` a subset of ``V_k`` of size ``p``.

The lemmas need ``delta`` to be a valid RIP constant of a large enough order.
Their proofs also use ``delta`` small enough for a few elementary estimates
(``delta <= 1/3`` for lemma-1a, ``delta <= 1/2`` for lemma-1b,
``9 (1 + 2 delta)(1 + delta) <= 10`` for lemma-3); instances outside these
ranges are skipped with a reason unless ``enforce_hypotheses=False``, in which
case they are evaluated and the report is marked advisory. Monte-carlo RIP
estimates are lower bounds and also make a report advisory.
"""
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from .errors import CapExceededError, DimensionError, ResultIOError
from .omp import RESIDUAL_ZERO, OmpTrace, SparseVector, error_vector, reconstruct, support_energy
from .oracles import SIGMA_DEFINITION, best_l_term_error
from .sensing import DEFAULT_CAP, RipEstimate, SensingMatrix, TheoremConstants, coherence

THEOREM_A = "theorem-A"
THEOREM_B = "theorem-B"
LEMMA_1A = "lemma-1a"
LEMMA_1B = "lemma-1b"
LEMMA_2 = "lemma-2"
LEMMA_3 = "lemma-3"
COHERENCE_CONDITION = "coherence-condition"

CLAIMS = (THEOREM_A, THEOREM_B, LEMMA_1A, LEMMA_1B, LEMMA_2, LEMMA_3, COHERENCE_CONDITION)

TOLERANCE = 1e-9

REPORT_FORMAT = "omplab-check v1"

# delta < 1 / (constant * sqrt(K)) with RIP of order K + 1 gives exact recovery in K steps
RIP_CONSTANT_CONSERVATIVE = 3.0
RIP_CONSTANT_SHARP = 1.0 + math.sqrt(2.0)


def holds(lhs, rhs) -> bool:
    return lhs <= rhs + TOLERANCE * (1.0 + abs(rhs))


@dataclass(frozen=True)
class CheckInstance:
    instance_id: str
    params: dict
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return holds(self.lhs, self.rhs)


@dataclass(frozen=True)
class SkippedInstance:
    instance_id: str
    params: dict
    reason: str


@dataclass
class CheckReport:
    claim: str
    instances: List[CheckInstance] = field(default_factory=list)
    skipped: List[SkippedInstance] = field(default_factory=list)
    advisory: bool = False
    notes: List[str] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def instances_checked(self) -> int:
        return len(self.instances)

    @property
    def violations(self) -> List[CheckInstance]:
        return [inst for inst in self.instances if not inst.holds]

    @property
    def passed(self) -> bool:
        return not self.violations

    @property
    def verdict(self) -> str:
        if self.advisory:
            return "advisory"
        return "passed" if self.passed else "failed"

    @property
    def worst_slack(self) -> Optional[float]:
        if not self.instances:
            return None
        return min(inst.slack for inst in self.instances)

    def _add(self, instance_id, params, lhs, rhs):
        self.instances.append(CheckInstance(instance_id, params, float(lhs), float(rhs)))

    def _skip(self, instance_id, params, reason):
        self.skipped.append(SkippedInstance(instance_id, params, reason))


@dataclass(frozen=True)
class RecoveryReport:
    success: bool
    support_match: bool
    relative_error: float
    iterations_used: int


def _delta_value(delta) -> Tuple[float, Optional[int], bool]:
    """``(value, order, exact)``; a bare float is taken as a certified constant of any order."""
    if isinstance(delta, RipEstimate):
        return delta.delta, delta.order, delta.exact
    return float(delta), None, True


def _steps_available(trace, l) -> int:
    """Index of the stored step that represents step `l`."""
    if l <= len(trace.steps):
        return l
    if trace.termination == RESIDUAL_ZERO:
        return len(trace.steps)
    raise ValueError(
        f"Trace stopped after {len(trace.steps)} steps ({trace.termination}); step {l} is unavailable")


def _residual_norm(trace, l) -> float:
    if l > len(trace.steps):
        _steps_available(trace, l)
        return 0.0
    if l == 0:
        return float(np.linalg.norm(trace.y))
    return trace.steps[l - 1].residual_norm


def _support(trace, l) -> Tuple[int, ...]:
    s = _steps_available(trace, l)
    return trace.steps[s - 1].support if s > 0 else ()


def _reaches(trace, l) -> bool:
    return l <= len(trace.steps) or trace.termination == RESIDUAL_ZERO


def _gate(report, enforce, instance_id, params, failures) -> bool:
    """Record failed hypotheses; return whether the instance should be evaluated."""
    if not failures:
        return True
    if enforce:
        report._skip(instance_id, params, "; ".join(failures))
        return False
    report.advisory = True
    params["hypotheses_failed"] = list(failures)
    return True


def _check_measurements(trace, x):
    if x.n != trace.phi.n:
        raise DimensionError(f"Signal has dimension {x.n}, matrix has {trace.phi.n} columns")
    gap = float(np.linalg.norm(trace.y - trace.phi.data @ x.dense()))
    if gap > TOLERANCE * float(np.linalg.norm(trace.y)):
        raise ValueError(f"The trace was not run on y = phi x (||y - phi x|| = {gap:.3e})")


def check_theorem_A(trace: OmpTrace, x: SparseVector, instance_id="") -> CheckReport:
    """``||r^l|| <= |x|_1 l^(-1/2)`` at every executed step."""
    _check_measurements(trace, x)
    report = CheckReport(THEOREM_A)
    l1 = x.l1_norm()
    for step in trace.steps:
        report._add(instance_id, {"l": step.l}, step.residual_norm, l1 / math.sqrt(step.l))
    return report


def check_theorem_B(trace: OmpTrace, phi: SensingMatrix, mu, l_max, cap=DEFAULT_CAP,
                    instance_id="") -> CheckReport:
    """``||r^{2l}|| <= 3 sigma_l(y)`` for ``1 <= l <= min(l_max, 1 / (20 mu))``.

    ``sigma_l`` comes from the exhaustive oracle. The largest observed ratio
    ``||r^{2l}|| / sigma_l`` is kept in ``extras["max_ratio"]``.
    """
    if phi.shape != trace.phi.shape:
        raise DimensionError(f"Matrix shape {phi.shape} does not match the trace's {trace.phi.shape}")
    report = CheckReport(THEOREM_B, notes=[f"sigma_l: {SIGMA_DEFINITION}"])
    l_hi = l_max if mu == 0 else min(l_max, int(math.floor(1.0 / (20.0 * mu))))
    max_ratio = None
    for l in range(1, l_hi + 1):
        params = {"l": l}
        if l > min(phi.m, phi.n):
            report._skip(instance_id, params, f"l exceeds min(M, N) = {min(phi.m, phi.n)}")
            continue
        lhs = _residual_norm(trace, 2 * l)
        try:
            best = best_l_term_error(phi, trace.y, l, cap)
        except CapExceededError as e:
            raise CapExceededError(f"theorem-B at l={l}: {e}", e.count, e.cap) from e
        params["best_support"] = list(best.best_support)
        report._add(instance_id, params, lhs, 3.0 * best.sigma)
        if best.sigma > 0:
            ratio = lhs / best.sigma
            max_ratio = ratio if max_ratio is None else max(max_ratio, ratio)
    report.extras["max_ratio"] = max_ratio
    return report


def check_lemma1(trace: OmpTrace, x: SparseVector, delta, l=None, constants=None,
                 enforce_hypotheses=True, instance_id="") -> Tuple[CheckReport, CheckReport]:
    """Check both parts of the RIP energy lemma at step `l` (every step when `l` is None).

    Returns
    -------
    tuple
        ``(lemma-1a report, lemma-1b report)``
    """
    if constants is None:
        constants = TheoremConstants()
    value, order, exact = _delta_value(delta)
    rep_a, rep_b = CheckReport(LEMMA_1A, advisory=not exact), CheckReport(LEMMA_1B, advisory=not exact)
    K = x.k
    steps = range(len(trace.steps) + 1) if l is None else [l]
    for li in steps:
        if not 0 <= li <= len(trace.steps):
            raise ValueError(f"Step {li} is beyond the trace length {len(trace.steps)}")
        common = []
        if order is not None and order < K + li:
            common.append(f"RIP order {order} < K + l = {K + li}")
        if li + K > constants.C * K ** 1.2:
            common.append("l + K exceeds C K^1.2")

        z = error_vector(trace, x, li)
        captured = _support(trace, li)
        missing = set(x.support) - set(captured)
        r_missing = support_energy(x, missing)

        params = {"l": li, "delta": value}
        if _gate(rep_a, enforce_hypotheses, instance_id, dict(params),
                 common + ([f"delta {value} > 1/3"] if value > 1.0 / 3.0 else [])):
            lhs = float(np.sum(z[list(captured)] ** 2)) if captured else 0.0
            rep_a._add(instance_id, params, lhs, 3.0 * value * r_missing)
        params = {"l": li, "delta": value}
        if _gate(rep_b, enforce_hypotheses, instance_id, dict(params),
                 common + ([f"delta {value} > 1/2"] if value > 0.5 else [])):
            rep_b._add(instance_id, params, r_missing, (1.0 + 2.0 * value) * _residual_norm(trace, li) ** 2)
    return rep_a, rep_b


def check_lemma2(trace: OmpTrace, x: SparseVector, delta, constants, l_k, p,
                 enforce_hypotheses=True, instance_id="") -> CheckReport:
    """``||r^{l_k+p}||^2 <= R_k / p (6 delta C K^1.2 + 2K)`` with ``R_k = R(V_0 \\ Lambda^{l_k})``."""
    if constants is None:
        constants = TheoremConstants()
    if p < 1:
        raise ValueError(f"p must be at least 1, got {p}")
    value, order, exact = _delta_value(delta)
    report = CheckReport(LEMMA_2, advisory=not exact)
    lhs = _residual_norm(trace, l_k + p) ** 2
    K = x.k

    failures = []
    if l_k + K > constants.C * K ** 1.2:
        failures.append("l_k + K exceeds C K^1.2")
    if l_k > 0:
        if order is not None and order < K + l_k:
            failures.append(f"RIP order {order} < K + l_k = {K + l_k}")
        if value > 1.0 / 3.0:
            failures.append(f"delta {value} > 1/3")

    params = {"l_k": l_k, "p": p, "delta": value}
    if _gate(report, enforce_hypotheses, instance_id, params, failures):
        r_k = support_energy(x, set(x.support) - set(_support(trace, l_k)))
        rhs = r_k / p * (6.0 * value * constants.C * K ** 1.2 + 2.0 * K)
        report._add(instance_id, params, lhs, rhs)
    return report


def check_lemma3(trace: OmpTrace, phi: SensingMatrix, x: SparseVector, delta, l_k, p, W,
                 mu=None, constants=None, enforce_hypotheses=True, instance_id="") -> CheckReport:
    """``R(V_k \\ Lambda^{l_k+2p}) <= 10 R(V_k \\ W) + 30 delta R_k``.

    Parameters
    ----------
    mu: float, optional, default: None
        Coherence of `phi`; computed when not given.
    """
    if constants is None:
        constants = TheoremConstants()
    if not _reaches(trace, l_k + 2 * p):
        raise ValueError(
            f"Trace stopped after {len(trace.steps)} steps ({trace.termination}); "
            f"step {l_k + 2 * p} is unavailable")
    value, order, exact = _delta_value(delta)
    report = CheckReport(LEMMA_3, advisory=not exact)
    if mu is None:
        mu = coherence(phi).mu
    K = x.k
    W = set(int(i) for i in W)
    v_k = set(x.support) - set(_support(trace, l_k))

    failures = []
    if not W <= v_k:
        failures.append("W is not a subset of V_k")
    if len(W) != p:
        failures.append(f"|W| = {len(W)} differs from p = {p}")
    if not 1 <= p <= K ** 0.8:
        failures.append(f"p = {p} outside [1, K^0.8]")
    if mu > 0 and p > 1.0 / (20.0 * mu):
        failures.append(f"p = {p} > 1/(20 mu) = {1.0 / (20.0 * mu):.4g}")
    if order is not None and order < K + l_k + 2 * p:
        failures.append(f"RIP order {order} < K + l_k + 2p = {K + l_k + 2 * p}")
    if 9.0 * (1.0 + 2.0 * value) * (1.0 + value) > 10.0:
        failures.append(f"delta {value} too large for 9(1+2 delta)(1+delta) <= 10")
    if l_k + 2 * p > constants.C * K ** 1.2:
        failures.append("l_k + 2p exceeds C K^1.2")

    params = {"l_k": l_k, "p": p, "W": sorted(W), "delta": value}
    if _gate(report, enforce_hypotheses, instance_id, params, failures):
        lhs = support_energy(x, v_k - set(_support(trace, l_k + 2 * p)))
        rhs = 10.0 * support_energy(x, v_k - W) + 30.0 * value * support_energy(x, v_k)
        report._add(instance_id, params, lhs, rhs)
    return report


def sweep_lemmas(trace: OmpTrace, phi: SensingMatrix, x: SparseVector, delta, constants=None,
                 p_max=2, mu=None, enforce_hypotheses=True, instance_id="") -> Dict[str, CheckReport]:
    """Run the three lemma checks over every ``l``, ``(l_k, p)`` and ``W`` the trace supports.

    Returns
    -------
    dict
        claim -> merged CheckReport for lemma-1a, lemma-1b, lemma-2 and lemma-3.
    """
    if constants is None:
        constants = TheoremConstants()
    if mu is None:
        mu = coherence(phi).mu
    kw = dict(enforce_hypotheses=enforce_hypotheses, instance_id=instance_id)

    rep_a, rep_b = check_lemma1(trace, x, delta, constants=constants, **kw)
    lemma2, lemma3 = [], []
    for l_k in range(len(trace.steps) + 1):
        v_k = sorted(set(x.support) - set(_support(trace, l_k)))
        for p in range(1, p_max + 1):
            if _reaches(trace, l_k + p):
                lemma2.append(check_lemma2(trace, x, delta, constants, l_k, p, **kw))
            if _reaches(trace, l_k + 2 * p):
                for W in itertools.combinations(v_k, p):
                    lemma3.append(check_lemma3(trace, phi, x, delta, l_k, p, W, mu=mu,
                                               constants=constants, **kw))
    return {
        LEMMA_1A: rep_a,
        LEMMA_1B: rep_b,
        LEMMA_2: merge_reports(lemma2, claim=LEMMA_2),
        LEMMA_3: merge_reports(lemma3, claim=LEMMA_3),
    }


def coherence_condition(mu, K) -> bool:
    """``mu < 1 / (2K - 1)``: OMP then recovers every K-sparse signal in exactly K steps."""
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    if not 0.0 <= mu <= 1.0 + 1e-12:
        raise ValueError(f"Coherence must lie in [0, 1], got {mu}")
    return mu < 1.0 / (2 * K - 1)


def rip_recovery_condition(delta, K, constant=RIP_CONSTANT_CONSERVATIVE) -> bool:
    """``delta < 1 / (constant sqrt(K))`` for a RIP constant of order ``K + 1``.

    Use `RIP_CONSTANT_CONSERVATIVE` (3) or `RIP_CONSTANT_SHARP` (1 + sqrt 2).
    """
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    value, order, _ = _delta_value(delta)
    if order is not None and order < K + 1:
        raise ValueError(f"Condition needs a RIP constant of order K + 1 = {K + 1}, got order {order}")
    return value < 1.0 / (constant * math.sqrt(K))


def verify_recovery(trace: OmpTrace, x: SparseVector, tol) -> RecoveryReport:
    """Recovery verdict: ``supp x`` captured and relative error at most `tol`."""
    x_hat = reconstruct(trace, len(trace.steps))
    x_dense = x.dense()
    rel = float(np.linalg.norm(x_hat - x_dense)) / max(float(np.linalg.norm(x_dense)), np.finfo(float).tiny)
    support_match = set(x.support) <= set(trace.final_support)
    return RecoveryReport(support_match and rel <= tol, support_match, rel, len(trace.steps))


def merge_reports(reports: Iterable[CheckReport], claim=None) -> CheckReport:
    """Concatenate reports of one claim, keeping their order."""
    reports = list(reports)
    if claim is None:
        if not reports:
            raise ValueError("Cannot infer the claim of an empty report list")
        claim = reports[0].claim
    merged = CheckReport(claim)
    for rep in reports:
        if rep.claim != claim:
            raise ValueError(f"Cannot merge a {rep.claim} report into {claim}")
        merged.instances.extend(rep.instances)
        merged.skipped.extend(rep.skipped)
        merged.advisory = merged.advisory or rep.advisory
        merged.notes.extend(n for n in rep.notes if n not in merged.notes)
        ratio = rep.extras.get("max_ratio")
        if ratio is not None:
            current = merged.extras.get("max_ratio")
            merged.extras["max_ratio"] = ratio if current is None else max(current, ratio)
    return merged


def format_report(report: CheckReport) -> dict:
    """Serializable summary: verdict, counts, worst slack per instance id and all violations."""
    per_instance = {}
    for inst in report.instances:
        entry = per_instance.setdefault(inst.instance_id, {"checked": 0, "violations": 0, "worst_slack": None})
        entry["checked"] += 1
        entry["violations"] += 0 if inst.holds else 1
        if entry["worst_slack"] is None or inst.slack < entry["worst_slack"]:
            entry["worst_slack"] = inst.slack
    return {
        "claim": report.claim,
        "verdict": report.verdict,
        "instances_checked": report.instances_checked,
        "violations": len(report.violations),
        "skipped": len(report.skipped),
        "worst_slack": report.worst_slack,
        "extras": report.extras,
        "notes": report.notes,
        "per_instance": per_instance,
        "violation_details": [
            {"instance_id": v.instance_id, "params": v.params, "lhs": v.lhs, "rhs": v.rhs, "slack": v.slack}
            for v in report.violations
        ],
    }


def export_reports(reports: Iterable[CheckReport], path):
    doc = {"format": REPORT_FORMAT, "reports": [format_report(r) for r in reports]}
    try:
        with open(path, "w") as f:
            json.dump(doc, f, indent=2)
    except OSError as e:
        raise ResultIOError(f"Cannot write check report to {path}: {e}", path) from e
