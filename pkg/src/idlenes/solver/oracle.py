"""Independent optima used to certify the branch-and-bound.

:func:`brute_force_oracle` enumerates every assignment (Gray-code order,
numba kernel when enabled). :func:`brute_force_indicator` and
:func:`indicator_cell_enumeration` solve the joint cell+beam problem in its
original indicator form, ``c_static * #cells with an active beam + m * #beams``;
neither shares code with the linearised solver.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import kernels
from .program import BinaryProgram

MAX_BRUTE_FORCE_VARS = 24


@dataclass(frozen=True, eq=False)
class OracleResult:
    x: Optional[np.ndarray]
    objective: float

    @property
    def feasible(self):
        return self.x is not None


def _decode(code, n):
    return np.array([(code >> j) & 1 for j in range(n)], dtype=bool)


def brute_force_oracle(program: BinaryProgram, use_numba=None) -> OracleResult:
    """Certified optimum of a program with at most 24 variables."""
    n = program.n_vars
    if n > MAX_BRUTE_FORCE_VARS:
        raise ValueError(f"brute force refuses {n} variables (limit {MAX_BRUTE_FORCE_VARS})")
    G, h = program.rows()
    code = kernels.enumerate_binary(program.costs, G, h, use_numba=use_numba)
    if code < 0:
        return OracleResult(None, math.inf)
    x = _decode(code, n)
    return OracleResult(x, program.objective(x))


def indicator_objective(x_beams, beam_cell, c_static, m):
    """Joint objective in indicator form for a beam selection."""
    x_beams = np.asarray(x_beams, dtype=bool)
    active = np.unique(np.asarray(beam_cell)[x_beams])
    return c_static * len(active) + m * int(x_beams.sum())


def brute_force_indicator(cover, beam_cell, c_static, m, use_numba=None) -> OracleResult:
    """Exhaustive minimum of the indicator-form joint objective (<= 24 beams).

    ``cover`` is (points, beams) bool; every point must be covered.
    """
    cover = np.asarray(cover, dtype=bool)
    n = cover.shape[1]
    if n > MAX_BRUTE_FORCE_VARS:
        raise ValueError(f"brute force refuses {n} variables (limit {MAX_BRUTE_FORCE_VARS})")
    beam_cell = np.asarray(beam_cell, dtype=np.int64)
    _, group = np.unique(beam_cell, return_inverse=True)
    n_groups = int(group.max()) + 1 if n else 0
    code = kernels.enumerate_binary(
        np.full(n, float(m)),
        cover.astype(np.int64),
        np.ones(cover.shape[0], dtype=np.int64),
        group=group,
        group_cost=np.full(n_groups, float(c_static)),
        use_numba=use_numba,
    )
    if code < 0:
        return OracleResult(None, math.inf)
    x = _decode(code, n)
    return OracleResult(x, indicator_objective(x, beam_cell, c_static, m))


def indicator_cell_enumeration(cover, beam_cell, c_static, m, max_cells=16) -> OracleResult:
    """Exact minimum of the indicator-form joint objective by enumerating cell sets.

    For every set S of switched-on cells the cost is ``c_static * |S|`` plus
    ``m`` times the fewest beams of S covering every point; the minimum over S
    is the indicator optimum. The inner minimum-cardinality cover is solved by
    the HiGHS MILP solver, so this route shares nothing with the linearised
    branch-and-bound. Sets are visited by size and the scan stops once
    ``c_static * |S|`` plus the fewest beams any cell set needs cannot beat
    the incumbent.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp

    cover = np.asarray(cover, dtype=bool)
    beam_cell = np.asarray(beam_cell, dtype=np.int64)
    n_pts, n_beams = cover.shape
    if n_pts == 0:
        return OracleResult(np.zeros(n_beams, dtype=bool), 0.0)
    if not cover.any(axis=1).all():
        return OracleResult(None, math.inf)
    cells = np.unique(beam_cell)
    if len(cells) > max_cells:
        raise ValueError(f"cell enumeration refuses {len(cells)} cells (limit {max_cells})")
    rows = np.unique(cover, axis=0)

    def min_cover(beams):
        sub = rows[:, beams]
        if not sub.any(axis=1).all():
            return None
        useful = sub.any(axis=0)
        sub, beams = sub[:, useful], beams[useful]
        res = milp(
            np.ones(len(beams)),
            constraints=LinearConstraint(sub.astype(np.float64), lb=1.0, ub=np.inf),
            integrality=np.ones(len(beams)),
            bounds=Bounds(0, 1),
        )
        if res.status != 0:  # pragma: no cover - covered instances are always feasible
            raise RuntimeError(f"MILP cover failed: {res.message}")
        return beams[np.round(res.x).astype(bool)]

    all_beams = np.arange(n_beams)
    floor = len(min_cover(all_beams))  # no cell set needs fewer beams
    best_val, best_sel = math.inf, None
    for size in range(1, len(cells) + 1):
        if c_static * size + m * floor >= best_val - 1e-9:
            break
        for S in itertools.combinations(cells.tolist(), size):
            sel = min_cover(all_beams[np.isin(beam_cell, S)])
            if sel is None:
                continue
            val = indicator_objective(np.isin(all_beams, sel), beam_cell, c_static, m)
            if val < best_val - 1e-9:
                best_val, best_sel = val, sel
    x = np.zeros(n_beams, dtype=bool)
    x[best_sel] = True
    return OracleResult(x, indicator_objective(x, beam_cell, c_static, m))
