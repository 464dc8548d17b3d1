"""Sparsest critical measurement tuples for DC state estimation."""
from .exact import SecurityIndexSolution, solve_security_index
from .jacobian import IntMatrix, build_h, null_space_basis, rank_exact
from .mincut import MinCutSolver, algorithm1, algorithm2, enumerate_min_cuts, min_cut
from .netmodel import (CaseError, Flow, Injection, MeasurementSet, Network, full_metering,
                       load_case, meter_weights, parse_case)
from .observability import (CriticalTuple, is_unobservable, oracle_sparsest, refine_to_critical,
                            verify_critical)

__all__ = [
    "CaseError", "CriticalTuple", "Flow", "Injection", "IntMatrix", "MeasurementSet",
    "MinCutSolver", "Network", "SecurityIndexSolution", "algorithm1", "algorithm2", "build_h",
    "enumerate_min_cuts", "full_metering", "is_unobservable", "load_case", "meter_weights",
    "min_cut", "null_space_basis", "oracle_sparsest", "parse_case", "rank_exact",
    "refine_to_critical", "solve_security_index", "verify_critical",
]
__version__ = "0.1.0"
