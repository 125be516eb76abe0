"""Desk-scale quantum Turing machine laboratory: well-formedness checks,
state-vector simulation and quantum optimization over quantum indices."""

from .machine import load_machine, parse_machine, emit_machine, encode_input, pair
from .evolution import run, run_reverse, build_evolution
from .wellformedness import check_local, check_global_unitarity
from .qopt import MachineProblem, extract_opt_matrix, solve_opt, square_problem, power_problem
from .estimators import QoptEstimator

__version__ = "0.1.0"

__all__ = [
    "MachineProblem",
    "QoptEstimator",
    "build_evolution",
    "check_global_unitarity",
    "check_local",
    "emit_machine",
    "encode_input",
    "extract_opt_matrix",
    "load_machine",
    "pair",
    "parse_machine",
    "power_problem",
    "run",
    "run_reverse",
    "solve_opt",
    "square_problem",
]
