"""Idle-mode network energy saving strategies.

Three ways to switch off broadcast resources while every required traffic
point keeps at least one SSB link at or above the threshold:

* local beam level: every cell stays on; each cell keeps the fewest beams of
  its candidate pool that cover the traffic points associated with it;
* cell level: the fewest cells that cover the required points, each with its
  full 32-beam baseline codebook;
* joint: cells and beams together, ``min c_static * sum x_c + m * sum x`` with
  the activation rows ``N_B x_c(i) >= sum of cell i's beams``.

Required points are those reached by at least one cell at baseline. All plans
are priced with the same fitted ``(c_static, m)`` so energies compare directly.
Every strategy works from a :class:`~idlenes.radio.LinkGainMap`; the scenario is
only needed to compute one when none is given.
"""
from __future__ import annotations

import enum
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .energy import FittedCost, network_energy
from .radio import LinkGainMap, compute_link_map
from .scenario import BASELINE_CODEBOOK_SIZE, Scenario
from .solver import BinaryProgram, SolverStatus, activation_links, solve_exact, solve_greedy

DEFAULT_SSB_THRESHOLD_DB = -6.0
DEFAULT_EXACT_LIMIT = 5000
DEFAULT_NODE_LIMIT = 1_000_000


class Strategy(str, enum.Enum):
    BASELINE = "baseline"
    LOCAL_BEAM = "local-beam"
    CELL = "cell"
    JOINT = "joint"


class InfeasibleCoverage(RuntimeError):
    """Some required traffic points cannot be covered by any allowed row."""

    def __init__(self, tp_ids, message="uncoverable traffic points"):
        self.tp_ids = [int(t) for t in tp_ids]
        super().__init__(f"{message}: {self.tp_ids}")


@dataclass(frozen=True, eq=False)
class ActivationPlan:
    strategy: Strategy
    active_cells: np.ndarray  # (C,) bool
    active_beams: np.ndarray  # (C, N_B) bool, candidate pool order
    objective_value: float
    status: SolverStatus
    gap: float
    threshold_db: float
    required_tp: np.ndarray  # traffic point ids that must stay covered
    solve_time: float = field(default=0.0, compare=False)

    @property
    def n_active_cells(self):
        return int(self.active_cells.sum())

    @property
    def n_active_beams(self):
        return int(self.active_beams.sum())

    def beams_per_cell(self):
        return self.active_beams.sum(axis=1)

    def to_dict(self, scenario: Scenario):
        """Structured form; solve time is left out so reruns compare byte for byte."""
        cells = []
        for c in np.flatnonzero(self.active_cells):
            pool = scenario.cells[c].candidate_beam_pool
            beams = [
                {
                    "index": int(b),
                    "type": int(pool[b].beam_type),
                    "azimuth_center": pool[b].azimuth_center,
                    "elevation_center": pool[b].elevation_center,
                }
                for b in np.flatnonzero(self.active_beams[c])
            ]
            cells.append({"cell_id": int(scenario.cells[c].id), "beams": beams})
        return {
            "strategy": self.strategy.value,
            "status": self.status.value,
            "objective": round(float(self.objective_value), 9),
            "gap": round(float(self.gap), 9),
            "threshold_db": self.threshold_db,
            "n_active_cells": self.n_active_cells,
            "n_active_beams": self.n_active_beams,
            "active_cells": cells,
            "required_tp": [int(t) for t in self.required_tp],
        }

    @classmethod
    def from_dict(cls, d, scenario: Scenario):
        C, B = scenario.n_cells, scenario.beams_per_cell
        cells = np.zeros(C, dtype=bool)
        beams = np.zeros((C, B), dtype=bool)
        index = {c.id: k for k, c in enumerate(scenario.cells)}
        for entry in d["active_cells"]:
            k = index[entry["cell_id"]]
            cells[k] = True
            for b in entry["beams"]:
                beams[k, b["index"]] = True
        return cls(
            strategy=Strategy(d["strategy"]),
            active_cells=cells,
            active_beams=beams,
            objective_value=float(d["objective"]),
            status=SolverStatus(d["status"]),
            gap=float(d["gap"]),
            threshold_db=float(d["threshold_db"]),
            required_tp=np.asarray(d["required_tp"], dtype=np.int64),
        )


# ---------------------------------------------------------------------------
# coverage bookkeeping
# ---------------------------------------------------------------------------


def required_points(link_map: LinkGainMap, threshold_db):
    """Traffic points covered by at least one cell's baseline codebook."""
    if link_map.n_cells == 0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero((link_map.cell_snr() >= threshold_db).any(axis=0))


def associate(link_map: LinkGainMap, tp_ids):
    """Serving cell of each traffic point: highest baseline SNR, lowest index on ties."""
    cell_snr = link_map.cell_snr()
    return np.argmax(cell_snr[:, tp_ids], axis=0).astype(np.int64)


def uncovered_points(plan: ActivationPlan, link_map: LinkGainMap):
    """Required points with no active beam of an active cell at or above the threshold."""
    C, B = plan.active_beams.shape
    mask = (plan.active_beams & plan.active_cells[:, None]).ravel()
    if not mask.any():
        return np.asarray(plan.required_tp, dtype=np.int64)
    snr = link_map.snr[mask][:, plan.required_tp]
    ok = (snr >= plan.threshold_db).any(axis=0)
    return np.asarray(plan.required_tp)[~ok]


def plan_energy(plan: ActivationPlan, fitted: FittedCost):
    return network_energy(plan, fitted)


def _link_map(scenario, link_map):
    if link_map is not None:
        return link_map
    if scenario is None:
        raise ValueError("need a scenario or a precomputed link map")
    return compute_link_map(scenario)


def _solve(program, exact_limit, node_limit):
    if program.n_vars <= exact_limit:
        return solve_exact(program, node_limit=node_limit)
    res = solve_greedy(program)
    if not res.feasible:
        return res
    # greedy at scale: certify what we can with the root LP bound only
    bound = solve_exact(program, node_limit=1)
    if bound.status is SolverStatus.EXACT_OPTIMAL:
        return bound
    lower = min(bound.lower_bound if bound.feasible else 0.0, res.objective)
    if bound.feasible and bound.objective < res.objective:
        res = bound
    return type(res)(res.x, res.objective, SolverStatus.GREEDY_FEASIBLE, gap=max(0.0, res.objective - lower),
                     lower_bound=lower, nodes=bound.nodes)


# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------


def baseline_plan(scenario: Scenario, fitted: FittedCost, threshold_db=DEFAULT_SSB_THRESHOLD_DB, link_map=None):
    """Every cell on with its 32-beam baseline codebook."""
    link_map = _link_map(scenario, link_map)
    C, B = link_map.n_cells, link_map.beams_per_cell
    beams = np.zeros((C, B), dtype=bool)
    beams[np.arange(C)[:, None], link_map.baseline_index] = True
    cells = np.ones(C, dtype=bool)
    plan = ActivationPlan(
        Strategy.BASELINE, cells, beams, 0.0, SolverStatus.EXACT_OPTIMAL, 0.0, float(threshold_db),
        required_points(link_map, threshold_db),
    )
    return _priced(plan, fitted)


def _priced(plan, fitted, solve_time=0.0):
    energy = plan_energy(plan, fitted)
    return ActivationPlan(
        plan.strategy, plan.active_cells, plan.active_beams, energy, plan.status, plan.gap,
        plan.threshold_db, plan.required_tp, solve_time,
    )


def _local_cell_program(link_map, c, tp_ids, threshold_db):
    cover = (link_map.cell_block(c)[:, tp_ids] >= threshold_db).T
    return BinaryProgram.build(np.ones(link_map.beams_per_cell), cover)


def optimize_local_beams(
    scenario: Scenario,
    fitted: FittedCost,
    threshold_db=DEFAULT_SSB_THRESHOLD_DB,
    associations=None,
    link_map=None,
    exact_limit=DEFAULT_EXACT_LIMIT,
    node_limit=DEFAULT_NODE_LIMIT,
    threads=1,
) -> ActivationPlan:
    """Per cell, the fewest candidate beams covering the cell's associated points.

    ``associations`` maps each required point (in ``required_points`` order) to
    its serving cell; by default the strongest baseline cell.
    """
    t0 = time.perf_counter()
    link_map = _link_map(scenario, link_map)
    required = required_points(link_map, threshold_db)
    assoc = associate(link_map, required) if associations is None else np.asarray(associations, dtype=np.int64)
    if assoc.shape != required.shape:
        raise ValueError("need one serving cell per required traffic point")
    C, B = link_map.n_cells, link_map.beams_per_cell

    def one(c):
        tp = required[assoc == c]
        if tp.size == 0:
            return c, tp, None
        return c, tp, _solve(_local_cell_program(link_map, c, tp, threshold_db), exact_limit, node_limit)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(C)))
    else:
        results = [one(c) for c in range(C)]

    beams = np.zeros((C, B), dtype=bool)
    status, gap = SolverStatus.EXACT_OPTIMAL, 0.0
    for c, tp, res in results:
        if res is None:
            continue
        if not res.feasible:
            cover = link_map.cell_block(c)[:, tp] >= threshold_db
            raise InfeasibleCoverage(tp[~cover.any(axis=0)], f"cell {c}: associated points outside its beam pool")
        beams[c] = res.x
        if res.status is not SolverStatus.EXACT_OPTIMAL:
            status = SolverStatus.GREEDY_FEASIBLE
        gap += res.gap * fitted.m
    plan = ActivationPlan(
        Strategy.LOCAL_BEAM, np.ones(C, dtype=bool), beams, 0.0, status, gap, float(threshold_db), required
    )
    return _priced(plan, fitted, time.perf_counter() - t0)


def optimize_cells(
    scenario: Scenario,
    fitted: FittedCost,
    threshold_db=DEFAULT_SSB_THRESHOLD_DB,
    link_map=None,
    exact_limit=DEFAULT_EXACT_LIMIT,
    node_limit=DEFAULT_NODE_LIMIT,
) -> ActivationPlan:
    """Fewest cells, each with its full baseline codebook, covering every required point."""
    t0 = time.perf_counter()
    link_map = _link_map(scenario, link_map)
    required = required_points(link_map, threshold_db)
    C, B = link_map.n_cells, link_map.beams_per_cell
    cover = (link_map.cell_snr()[:, required] >= threshold_db).T
    res = _solve(BinaryProgram.build(np.ones(C), cover), exact_limit, node_limit)
    if not res.feasible:  # pragma: no cover - required points are cell-covered by definition
        raise InfeasibleCoverage(required[~cover.any(axis=1)])
    cells = np.asarray(res.x, dtype=bool)
    beams = np.zeros((C, B), dtype=bool)
    on = np.flatnonzero(cells)
    beams[on[:, None], link_map.baseline_index[on]] = True
    per_cell = fitted.c_static + BASELINE_CODEBOOK_SIZE * fitted.m
    plan = ActivationPlan(
        Strategy.CELL, cells, beams, 0.0, res.status, res.gap * per_cell, float(threshold_db), required
    )
    return _priced(plan, fitted, time.perf_counter() - t0)


def joint_program(link_map: LinkGainMap, required, threshold_db, fitted: FittedCost) -> BinaryProgram:
    """Beam variables cell-major, then one activation variable per cell."""
    C, B = link_map.n_cells, link_map.beams_per_cell
    cover = (link_map.snr[:, required] >= threshold_db).T
    cover = np.hstack([cover, np.zeros((cover.shape[0], C), dtype=bool)])
    costs = np.concatenate([np.full(C * B, fitted.m), np.full(C, fitted.c_static)])
    return BinaryProgram.build(costs, cover, link=activation_links(C, B))


def optimize_joint(
    scenario: Scenario,
    fitted: FittedCost,
    threshold_db=DEFAULT_SSB_THRESHOLD_DB,
    link_map=None,
    exact_limit=DEFAULT_EXACT_LIMIT,
    node_limit=DEFAULT_NODE_LIMIT,
) -> ActivationPlan:
    """Cells and beams chosen together under the linearised activation cost."""
    t0 = time.perf_counter()
    link_map = _link_map(scenario, link_map)
    required = required_points(link_map, threshold_db)
    C, B = link_map.n_cells, link_map.beams_per_cell
    program = joint_program(link_map, required, threshold_db, fitted)
    res = _solve(program, exact_limit, node_limit)
    if not res.feasible:  # pragma: no cover - baseline beams are a feasible point
        raise InfeasibleCoverage(required[~program.cover.any(axis=1)])
    x = np.asarray(res.x, dtype=bool)
    beams = x[: C * B].reshape(C, B)
    cells = x[C * B :].copy()
    has_beam = beams.any(axis=1)
    # an active cell without beams only adds cost, so a solution with c_static > 0 never keeps one
    if fitted.c_static > 0 and not np.array_equal(cells, has_beam):
        raise RuntimeError("activation variables disagree with the active beams")
    cells = cells | has_beam
    plan = ActivationPlan(Strategy.JOINT, cells, beams, 0.0, res.status, res.gap, float(threshold_db), required)
    return _priced(plan, fitted, time.perf_counter() - t0)


def optimize(strategy, scenario, fitted, threshold_db=DEFAULT_SSB_THRESHOLD_DB, link_map=None, **kw):
    strategy = Strategy(strategy)
    if strategy is Strategy.BASELINE:
        return baseline_plan(scenario, fitted, threshold_db, link_map)
    if strategy is Strategy.LOCAL_BEAM:
        return optimize_local_beams(scenario, fitted, threshold_db, link_map=link_map, **kw)
    kw.pop("threads", None)
    if strategy is Strategy.CELL:
        return optimize_cells(scenario, fitted, threshold_db, link_map=link_map, **kw)
    return optimize_joint(scenario, fitted, threshold_db, link_map=link_map, **kw)
