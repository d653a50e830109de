# -*- coding: utf-8 -*-
from importlib.metadata import PackageNotFoundError, version

from .analysis import (CheckReport, check_lemma1, check_lemma2, check_lemma3, check_theorem_A,
                       check_theorem_B, coherence_condition, rip_recovery_condition, sweep_lemmas,
                       verify_recovery)
from .errors import (CapExceededError, DimensionError, FormatError, IllConditionedError, OmplabError,
                     ResultIOError)
from .experiments import (GridConfig, SuiteConfig, coherence_concentration_study, export_results,
                          fit_measurement_scaling, iterations_to_recovery, rip_concentration_study,
                          run_claim_suite, run_recovery_grid)
from .omp import SparseVector, StopRule, omp_solve
from .oracles import best_l_term_error, l0_decode_exhaustive
from .sensing import (SensingMatrix, TheoremConstants, coherence, gen_bernoulli, gen_gaussian_normalized,
                      rip_delta_exhaustive, rip_delta_monte_carlo, theorem1_hypotheses)

__all__ = [
    "CheckReport", "check_lemma1", "check_lemma2", "check_lemma3", "check_theorem_A", "check_theorem_B",
    "coherence_condition", "rip_recovery_condition", "sweep_lemmas", "verify_recovery",
    "CapExceededError", "DimensionError", "FormatError", "IllConditionedError", "OmplabError", "ResultIOError",
    "GridConfig", "SuiteConfig", "coherence_concentration_study", "export_results", "fit_measurement_scaling",
    "iterations_to_recovery", "rip_concentration_study", "run_claim_suite", "run_recovery_grid",
    "SparseVector", "StopRule", "omp_solve",
    "best_l_term_error", "l0_decode_exhaustive",
    "SensingMatrix", "TheoremConstants", "coherence", "gen_bernoulli", "gen_gaussian_normalized",
    "rip_delta_exhaustive", "rip_delta_monte_carlo", "theorem1_hypotheses"]

try:
    # Change here if project is renamed and does not equal the package name
    __version__ = version(__name__)
except PackageNotFoundError:
    __version__ = 'unknown'
finally:
    del version, PackageNotFoundError
