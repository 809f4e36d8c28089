"""Binary linear programs: exact branch-and-bound, greedy fallback and brute-force oracles."""
from .exact import DEFAULT_NODE_LIMIT, solve_exact
from .greedy import solve_greedy
from .oracle import (
    MAX_BRUTE_FORCE_VARS,
    OracleResult,
    brute_force_indicator,
    brute_force_oracle,
    indicator_cell_enumeration,
    indicator_objective,
)
from .program import BinaryProgram, SolveResult, SolverStatus, activation_links

__all__ = [
    "BinaryProgram",
    "DEFAULT_NODE_LIMIT",
    "MAX_BRUTE_FORCE_VARS",
    "OracleResult",
    "SolveResult",
    "SolverStatus",
    "activation_links",
    "brute_force_indicator",
    "brute_force_oracle",
    "indicator_cell_enumeration",
    "indicator_objective",
    "solve_exact",
    "solve_greedy",
]
