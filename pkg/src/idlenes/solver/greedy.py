"""Ratio greedy for cover programs, extended to activation-linked variables."""
from __future__ import annotations

import numpy as np

from .program import BinaryProgram, SolveResult, SolverStatus


def parent_links(program: BinaryProgram):
    """Map each variable to every activation variable it requires, transitively.

    Every linking row must have the form ``g_p x_p - sum a_j x_j >= 0`` with a
    single positive coefficient and ``sum a_j <= g_p``, i.e. it says
    ``x_j <= x_p`` for each member j. Raises ``ValueError`` otherwise.
    """
    parents = [[] for _ in range(program.n_vars)]
    for row, rhs in zip(program.link, program.link_rhs):
        pos = np.flatnonzero(row > 0)
        neg = np.flatnonzero(row < 0)
        if rhs != 0 or len(pos) != 1 or -row[neg].sum() > row[pos[0]]:
            raise ValueError("greedy supports cover rows plus activation-link rows (g_p x_p >= sum x_j) only")
        for j in neg:
            parents[j].append(int(pos[0]))
    # close transitively so chains of activations are priced and switched on together
    closed = []
    for j in range(program.n_vars):
        seen, stack = set(), list(parents[j])
        while stack:
            p = stack.pop()
            if p != j and p not in seen:
                seen.add(p)
                stack.extend(parents[p])
        closed.append(sorted(seen))
    return closed


def solve_greedy(program: BinaryProgram) -> SolveResult:
    """Repeatedly pick the variable with the most newly covered demand per unit cost.

    A variable's price includes the cost of any not-yet-selected activation
    variables it needs. Ties go to the lowest index. A zero-cost variable with
    positive coverage beats every priced one.
    """
    parents = parent_links(program)
    n = program.n_vars
    A = program.cover.astype(np.int64)
    residual = program.cover_rhs.astype(np.int64).copy()
    x = np.zeros(n, dtype=bool)
    c = program.costs
    while np.any(residual > 0):
        gain = (A[residual > 0] > 0).sum(axis=0).astype(np.float64)
        gain[x] = 0.0
        cand = np.flatnonzero(gain > 0)
        if cand.size == 0:
            return SolveResult(None, float("inf"), SolverStatus.INFEASIBLE)
        price = np.array([c[j] + sum(c[p] for p in parents[j] if not x[p]) for j in cand])
        with np.errstate(divide="ignore"):
            ratio = np.where(price > 0, gain[cand] / np.where(price > 0, price, 1.0), np.inf)
        j = int(cand[int(np.argmax(ratio))])
        x[j] = True
        residual -= A[:, j]
        for p in parents[j]:
            if not x[p]:
                x[p] = True
                residual -= A[:, p]
    if not program.is_feasible(x):  # pragma: no cover - guarded by parent_links
        return SolveResult(None, float("inf"), SolverStatus.INFEASIBLE)
    return SolveResult(x, program.objective(x), SolverStatus.GREEDY_FEASIBLE)
