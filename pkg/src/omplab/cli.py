"""Command line interface.

Verbs: ``gen``, ``analyze``, ``solve``, ``check``, ``grid``, ``fit`` and
``plot``. Every run prints its resolved configuration as JSON to standard
error before doing any work.

Exit codes: 0 success, 1 check violations, 2 usage errors, 3 I/O errors.
"""
import argparse
import json
import os
import sys

import matplotlib
from matplotlib.figure import Figure

from . import tracking
from .analysis import format_report, verify_recovery
from .errors import DimensionError, FormatError, ResultIOError
from .experiments import (DEFAULT_THRESHOLD, GRID_ENSEMBLES, SIGNAL_MODELS, SUITE_CLAIMS, UNIT_VALUES,
                          GridConfig, GridResult, SuiteConfig, export_results, fit_measurement_scaling,
                          read_grid_csv, run_claim_suite, run_recovery_grid)
from .omp import SparseVector, StopRule, export_trace, format_trace, omp_solve
from .sensing import (DEFAULT_CAP, EXHAUSTIVE, MONTE_CARLO, coherence, generate, read_matrix,
                      rip_delta_exhaustive, rip_delta_monte_carlo, theorem1_hypotheses, write_matrix)

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_USAGE = 2
EXIT_IO = 3

SEED_ENV = "OMPLAB_SEED"

SVG_RC = {"svg.hashsalt": "omplab", "svg.fonttype": "none"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """Raise instead of exiting so `run_command` can map usage errors itself."""

    def error(self, message):
        raise UsageError(message)


def read_signal(path) -> SparseVector:
    """Read a signal file: ``N`` on the first line, then one ``index value`` pair per line."""
    try:
        with open(path) as f:
            lines = [line.strip() for line in f if line.strip()]
    except OSError as e:
        raise ResultIOError(f"Cannot read signal from {path}: {e}", path) from e
    if not lines:
        raise FormatError(f"{path}: empty signal file")
    pairs = [line.split() for line in lines[1:]]
    if any(len(p) != 2 for p in pairs):
        raise FormatError(f"{path}: expected one 'index value' pair per line")
    try:
        n = int(lines[0])
        support = tuple(int(p[0]) for p in pairs)
        values = tuple(float(p[1]) for p in pairs)
    except ValueError as e:
        raise FormatError(f"{path}: {e}") from e
    return SparseVector(n, support, values)


def write_signal(x: SparseVector, path):
    lines = [str(x.n)] + [f"{i} {format(v, '.17g')}" for i, v in zip(x.support, x.values)]
    try:
        with open(path, "w") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise ResultIOError(f"Cannot write signal to {path}: {e}", path) from e


def emit_svg_curves(result: GridResult, path):
    """Plot success rate against M with one curve per K.

    The output is byte-identical for identical input: the SVG hash salt is
    fixed and no date is embedded. Each curve carries the id ``curve-k<K>``.
    """
    if not result.cells:
        raise ValueError("Cannot plot an empty grid")
    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(6.4, 4.8))
        ax = fig.add_subplot(1, 1, 1)
        for k in result.k_values:
            ms = [m for m in result.m_values if (m, k) in result.cells]
            rates = [result.cells[(m, k)].success_rate for m in ms]
            line, = ax.plot(ms, rates, marker="o", label=f"K={k}")
            line.set_gid(f"curve-k{k}")
        ax.set_xlabel("M (measurements)")
        ax.set_ylabel("success rate")
        ax.set_ylim(-0.05, 1.05)
        if result.config is not None:
            ax.set_title(f"OMP recovery, N={result.config.n}, {result.config.ensemble}")
        ax.legend(loc="lower right")
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise ResultIOError(f"Cannot write plot to {path}: {e}", path) from e


def _dump(doc, path):
    text = json.dumps(doc, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as f:
            f.write(text)
    except OSError as e:
        raise ResultIOError(f"Cannot write {path}: {e}", path) from e


def _load_grid(args) -> GridResult:
    if (args.grid is None) == (args.from_run is None):
        raise UsageError("give exactly one of --grid and --from-run")
    if args.from_run is not None:
        return tracking.load_grid_from_run(args.from_run)
    return read_grid_csv(args.grid)


def _cmd_gen(args):
    phi = generate(args.ensemble, args.m, args.n, args.seed)
    write_matrix(phi, args.out)
    return EXIT_OK


def _cmd_analyze(args):
    phi = read_matrix(args.matrix)
    report = coherence(phi)
    doc = {"m": phi.m, "n": phi.n, "ensemble": phi.ensemble,
           "coherence": report.mu, "coherence_pair": list(report.pair), "rip": []}
    for order in args.rip_order:
        if args.method == EXHAUSTIVE:
            estimate = rip_delta_exhaustive(phi, order, args.cap)
        else:
            estimate = rip_delta_monte_carlo(phi, order, args.trials, args.seed)
        doc["rip"].append({"order": estimate.order, "delta": estimate.delta, "method": estimate.method,
                           "subsets_examined": estimate.subsets_examined})
    if args.k is not None:
        hyp = theorem1_hypotheses(phi, args.k, cap=args.cap, mc_trials=args.trials, seed=args.seed)
        doc["hypotheses"] = {
            "K": hyp.K,
            "rip_order_required": hyp.rip_order_required,
            "delta_required": hyp.delta_required,
            "delta_measured": None if hyp.delta_measured is None else hyp.delta_measured.delta,
            "mu_required": hyp.mu_required,
            "mu_measured": hyp.mu_measured,
            "coherence_holds": hyp.coherence_holds,
            "rip_holds": hyp.rip_holds,
            "feasible": hyp.feasible,
            "notes": hyp.notes,
        }
    _dump(doc, args.out)
    return EXIT_OK


def _cmd_solve(args):
    phi = read_matrix(args.matrix)
    x = read_signal(args.signal)
    if x.n != phi.n:
        raise DimensionError(f"Signal has dimension {x.n} but the matrix has {phi.n} columns")
    trace = omp_solve(phi, phi.data @ x.dense(), StopRule(args.residual_tol, args.max_iterations),
                      verbose=args.verbose)
    if args.out is None:
        sys.stdout.write(format_trace(trace))
    else:
        export_trace(trace, args.out)
    rec = verify_recovery(trace, x, args.success_tol)
    print(f"omplab: {trace.termination} after {len(trace.steps)} steps; "
          f"recovered={rec.success} relative_error={rec.relative_error:.3e}", file=sys.stderr)
    return EXIT_OK


def _cmd_check(args):
    phi = read_matrix(args.matrix) if args.matrix is not None else None
    if phi is not None:
        m, n = phi.shape
    elif args.m is None or args.n is None:
        raise UsageError("check needs --matrix or both --m and --n")
    else:
        m, n = args.m, args.n
    config = SuiteConfig(
        claim=args.claim, m=m, n=n, k_values=tuple(args.k), trials=args.trials, master_seed=args.seed,
        ensemble=args.ensemble, signal_models=tuple(args.signal_models), l_max=args.l_max, p_max=args.p_max,
        max_rip_order=args.max_rip_order, cap=args.cap, enforce_hypotheses=not args.no_enforce_hypotheses)

    if args.track:
        with tracking.start_run(run_name=f"check-{args.claim}", experiment_name=args.experiment):
            result = run_claim_suite(config, phi, verbose=args.verbose)
            tracking.track_suite(result, verbose=args.verbose)
    else:
        result = run_claim_suite(config, phi, verbose=args.verbose)

    if args.out is None:
        _dump({"instances": result.instances, "vacuous": result.vacuous,
               "vacuous_by_claim": result.vacuous_by_claim, "extras": result.extras,
               "reports": [format_report(r) for r in result.reports.values()]}, None)
    else:
        export_results(result, args.out)

    failing = [r for r in result.reports.values() if r.violations and not r.advisory]
    for r in failing:
        print(f"omplab: {r.claim}: {len(r.violations)} violations (worst slack {r.worst_slack:.3e})",
              file=sys.stderr)
    return EXIT_VIOLATIONS if failing else EXIT_OK


def _cmd_grid(args):
    config = GridConfig(
        n=args.n, m_values=tuple(args.m), k_values=tuple(args.k), trials_per_cell=args.trials,
        ensemble=args.ensemble, master_seed=args.seed, signal_model=args.signal_model,
        success_tol=args.success_tol)
    if args.track:
        with tracking.start_run(run_name="grid", experiment_name=args.experiment):
            result = run_recovery_grid(config, workers=args.workers, verbose=args.verbose)
            tracking.track_grid(result, verbose=args.verbose)
            if args.svg is not None:
                with tracking.managed_artifact("curves.svg") as artifact:
                    emit_svg_curves(result, artifact.get_path())
    else:
        result = run_recovery_grid(config, workers=args.workers, verbose=args.verbose)
    export_results(result, args.out)
    if args.svg is not None:
        emit_svg_curves(result, args.svg)
    return EXIT_OK


def _cmd_fit(args):
    result = _load_grid(args)
    fit = fit_measurement_scaling(result, args.threshold, n=args.n)
    if args.out is None:
        _dump({"alpha": fit.alpha, "a": fit.a, "residual": fit.residual, "threshold": fit.threshold,
               "critical_m": {str(k): m for k, m in fit.critical_m.items()}, "excluded": list(fit.excluded),
               "isotonic_applied": fit.isotonic_applied, "references": list(fit.references)}, None)
    else:
        export_results(fit, args.out)
    return EXIT_OK


def _cmd_plot(args):
    emit_svg_curves(_load_grid(args), args.out)
    return EXIT_OK


def _add_seed(p):
    p.add_argument("--seed", type=int, default=None,
                   help=f"master seed (default: ${SEED_ENV} or 0)")


def _add_tracking(p, track=True):
    if track:
        p.add_argument("--track", action="store_true", help="record the run in mlflow")
        p.add_argument("--experiment", default=None, help="mlflow experiment name")
    p.add_argument("--tracking-uri", default=None,
                   help="mlflow tracking URI; 'file', 'localhost' and 'localhost-<k>' are shorthands")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="omplab", description="Orthogonal Matching Pursuit recovery experiments")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="verb", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", help="generate a sensing matrix")
    p.add_argument("--ensemble", choices=GRID_ENSEMBLES, default="bernoulli")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    _add_seed(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_gen)

    p = sub.add_parser("analyze", help="coherence, RIP constants and recovery hypotheses of a matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--rip-order", type=int, nargs="*", default=[])
    p.add_argument("--method", choices=(EXHAUSTIVE, MONTE_CARLO), default=EXHAUSTIVE)
    p.add_argument("--trials", type=int, default=1000, help="monte-carlo subsets")
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--k", type=int, default=None, help="evaluate the recovery hypotheses for this sparsity")
    _add_seed(p)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_analyze)

    p = sub.add_parser("solve", help="run OMP on y = phi x and write the trace")
    p.add_argument("--matrix", required=True)
    p.add_argument("--signal", required=True)
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--residual-tol", type=float, default=None)
    p.add_argument("--success-tol", type=float, default=1e-8)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser("check", help="check a convergence claim on seeded instances")
    p.add_argument("--claim", type=str.lower, required=True,
                   choices=[c.lower() for c in SUITE_CLAIMS])
    p.add_argument("--matrix", default=None, help="use this matrix for every trial")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--ensemble", choices=GRID_ENSEMBLES, default="bernoulli")
    p.add_argument("--signal-models", nargs="+", choices=SIGNAL_MODELS, default=list(SIGNAL_MODELS))
    p.add_argument("--l-max", type=int, default=3)
    p.add_argument("--p-max", type=int, default=2)
    p.add_argument("--max-rip-order", type=int, default=8)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--no-enforce-hypotheses", action="store_true")
    _add_seed(p)
    p.add_argument("--out", default=None)
    _add_tracking(p)
    p.set_defaults(handler=_cmd_check)

    p = sub.add_parser("grid", help="recovery probability over (M, K)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, nargs="+", required=True)
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--ensemble", choices=GRID_ENSEMBLES, default="bernoulli")
    p.add_argument("--signal-model", choices=SIGNAL_MODELS, default=UNIT_VALUES)
    p.add_argument("--success-tol", type=float, default=1e-8)
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: all CPUs)")
    _add_seed(p)
    p.add_argument("--out", required=True, help="grid CSV")
    p.add_argument("--svg", default=None, help="also plot the curves to this file")
    _add_tracking(p)
    p.set_defaults(handler=_cmd_grid)

    p = sub.add_parser("fit", help="fit the measurement scaling exponent of a grid")
    p.add_argument("--grid", default=None)
    p.add_argument("--from-run", default=None, help="mlflow run id holding a grid")
    p.add_argument("--n", type=int, default=None, help="signal dimension (read from the run when omitted)")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--out", default=None)
    _add_tracking(p, track=False)
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("plot", help="plot success rate curves of a grid to SVG")
    p.add_argument("--grid", default=None)
    p.add_argument("--from-run", default=None, help="mlflow run id holding a grid")
    p.add_argument("--out", required=True)
    _add_tracking(p, track=False)
    p.set_defaults(handler=_cmd_plot)

    return parser


def _resolve(args):
    """Fill in defaults that depend on the environment."""
    if "seed" in vars(args) and args.seed is None:
        value = os.environ.get(SEED_ENV)
        try:
            args.seed = int(value) if value is not None else 0
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {value!r}")
    if "workers" in vars(args) and args.workers is None:
        args.workers = os.cpu_count() or 1
    if "claim" in vars(args):
        args.claim = {c.lower(): c for c in SUITE_CLAIMS}[args.claim]
    if getattr(args, "tracking_uri", None) is not None:
        tracking.set_tracking_uri(args.tracking_uri)


def run_command(argv=None) -> int:
    """Parse `argv`, run the verb and return the exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _resolve(args)
    except UsageError as e:
        print(f"omplab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return EXIT_OK if not e.code else EXIT_USAGE

    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "handler"}
    print(json.dumps(resolved, sort_keys=True), file=sys.stderr)

    try:
        return args.handler(args)
    except (ResultIOError, FormatError, OSError) as e:
        print(f"omplab: error: {e}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ValueError) as e:
        print(f"omplab: error: {e}", file=sys.stderr)
        return EXIT_USAGE


def run():
    """Entry point for console_scripts"""
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    run()
