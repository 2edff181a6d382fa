"""Quadratic programs with linear complementarity constraints."""

from .problem import LcqpProblem, load_problem, save_problem
from .solver import SolverOptions, SolverResult, Status, check_strong_stationarity, solve

__all__ = [
    "LcqpProblem",
    "SolverOptions",
    "SolverResult",
    "Status",
    "check_strong_stationarity",
    "load_problem",
    "save_problem",
    "solve",
]
