import numpy as np
import pytest

from helpers import desk_config, toy_link_map
from idlenes.energy import FittedCost
from idlenes.nes import (
    ActivationPlan,
    InfeasibleCoverage,
    Strategy,
    associate,
    baseline_plan,
    joint_program,
    optimize,
    optimize_cells,
    optimize_joint,
    optimize_local_beams,
    required_points,
    uncovered_points,
)
from idlenes.radio import compute_link_map
from idlenes.solver import SolverStatus, brute_force_indicator
from idlenes.twin import generate

ON, OFF = 0.0, -999.0
UNIT = FittedCost(c_static=10.0, m=1.0, r_squared=1.0)


def _snr(rows, n_tp):
    """Toy SNR matrix: each row lists the points it reaches at 0 dB."""
    out = np.full((len(rows), n_tp), OFF)
    for r, pts in enumerate(rows):
        out[r, list(pts)] = ON
    return out


def _covered(plan, link_map):
    return uncovered_points(plan, link_map).size == 0


class TestJoint:
    def test_two_by_two(self):
        lm = toy_link_map(_snr([{0}, {1}, {1}, {2}], 3), n_cells=2, beams_per_cell=2)
        plan = optimize_joint(None, UNIT, 0.0, link_map=lm)
        assert plan.active_cells.tolist() == [True, True]
        assert plan.n_active_beams == 3 and plan.objective_value == 23
        assert plan.status is SolverStatus.EXACT_OPTIMAL and plan.gap == 0
        brute = brute_force_indicator((lm.snr >= 0).T, [0, 0, 1, 1], 10.0, 1.0)
        assert brute.objective == 23

    def test_one_beam_covers_everything(self):
        lm = toy_link_map(_snr([{0}, {0, 1, 2}, {2}, {1}], 3), n_cells=2, beams_per_cell=2)
        plan = optimize_joint(None, UNIT, 0.0, link_map=lm)
        assert plan.objective_value == 10 + 1
        assert plan.active_beams.tolist() == [[False, True], [False, False]]

    def test_program_shape(self):
        lm = toy_link_map(_snr([{0}, {1}, {1}, {2}], 3), n_cells=2, beams_per_cell=2)
        p = joint_program(lm, np.arange(3), 0.0, UNIT)
        assert p.n_vars == 6
        assert p.costs.tolist() == [1, 1, 1, 1, 10, 10]
        assert p.link.tolist() == [[-1, -1, 0, 0, 2, 0], [0, 0, -1, -1, 0, 2]]


class TestLocalBeam:
    def test_wide_beam_wins(self):
        lm = toy_link_map(_snr([{0}, {1}, {0, 1}], 2), n_cells=1, beams_per_cell=3)
        plan = optimize_local_beams(None, UNIT, 0.0, link_map=lm)
        assert plan.active_beams.tolist() == [[False, False, True]]

    def test_cell_without_points_keeps_static_cost(self):
        # cell 1 reaches point 0 more weakly than cell 0, so nothing is associated with it
        snr = _snr([{0}, {0}], 1)
        snr[1, 0] = -3.0
        lm = toy_link_map(snr, n_cells=2, beams_per_cell=1)
        plan = optimize_local_beams(None, UNIT, -6.0, link_map=lm)
        assert plan.active_cells.tolist() == [True, True]
        assert plan.beams_per_cell().tolist() == [1, 0]
        assert plan.objective_value == 2 * 10 + 1

    def test_association_length_checked(self):
        lm = toy_link_map(_snr([{0, 1}], 2), n_cells=1, beams_per_cell=1)
        with pytest.raises(ValueError):
            optimize_local_beams(None, UNIT, 0.0, associations=[0], link_map=lm)

    def test_bad_association_is_infeasible(self):
        lm = toy_link_map(_snr([{0}, {1}], 2), n_cells=2, beams_per_cell=1)
        with pytest.raises(InfeasibleCoverage) as exc:
            optimize_local_beams(None, UNIT, 0.0, associations=[1, 1], link_map=lm)
        assert exc.value.tp_ids == [0]


class TestCells:
    def test_chain(self):
        lm = toy_link_map(_snr([{0, 1}, {1, 2}, {2, 3}], 4), n_cells=3, beams_per_cell=1)
        plan = optimize_cells(None, UNIT, 0.0, link_map=lm)
        assert plan.n_active_cells == 2
        assert plan.active_cells.tolist() == [True, False, True]

    def test_disjoint_keeps_all(self):
        lm = toy_link_map(_snr([{0}, {1}, {2}], 3), n_cells=3, beams_per_cell=1)
        assert optimize_cells(None, UNIT, 0.0, link_map=lm).n_active_cells == 3


def test_needs_scenario_or_map():
    with pytest.raises(ValueError):
        baseline_plan(None, UNIT)


@pytest.fixture(scope="module", params=[1, 4, 9])
def solved(request, fitted):
    scen = generate(desk_config(request.param, n_poles=3, size=70))
    lm = compute_link_map(scen)
    plans = {s: optimize(s, scen, fitted, link_map=lm) for s in Strategy}
    return scen, lm, plans


class TestOnTwins:
    def test_all_plans_cover(self, solved):
        _, lm, plans = solved
        for plan in plans.values():
            assert _covered(plan, lm)

    def test_statuses_exact(self, solved):
        for plan in solved[2].values():
            assert plan.status is SolverStatus.EXACT_OPTIMAL and plan.gap == 0

    def test_dominance(self, solved):
        e = {s: p.objective_value for s, p in solved[2].items()}
        tol = 1e-9 * e[Strategy.BASELINE]
        assert e[Strategy.JOINT] <= e[Strategy.CELL] + tol
        assert e[Strategy.JOINT] <= e[Strategy.LOCAL_BEAM] + tol
        assert e[Strategy.LOCAL_BEAM] <= e[Strategy.BASELINE] + tol
        assert e[Strategy.CELL] <= e[Strategy.BASELINE] + tol

    def test_linking_iff(self, solved):
        p = solved[2][Strategy.JOINT]
        assert np.array_equal(p.active_cells, p.active_beams.any(axis=1))

    def test_baseline_shape(self, solved, fitted):
        scen, _, plans = solved
        b = plans[Strategy.BASELINE]
        assert b.n_active_cells == scen.n_cells and b.n_active_beams == 32 * scen.n_cells
        assert b.objective_value == pytest.approx(scen.n_cells * (fitted.c_static + 32 * fitted.m))

    def test_cell_plans_use_full_codebook(self, solved):
        scen, _, plans = solved
        p = plans[Strategy.CELL]
        for k in np.flatnonzero(p.active_cells):
            assert np.flatnonzero(p.active_beams[k]).tolist() == sorted(scen.cells[k].baseline_pool_indices())

    def test_local_beam_counts(self, solved):
        p = solved[2][Strategy.LOCAL_BEAM]
        assert p.active_cells.all()
        assert p.beams_per_cell().max() <= 32

    def test_required_points_from_baseline(self, solved):
        _, lm, plans = solved
        req = required_points(lm, -6.0)
        for plan in plans.values():
            assert np.array_equal(plan.required_tp, req)

    def test_associations_are_strongest_cell(self, solved):
        _, lm, plans = solved
        req = plans[Strategy.JOINT].required_tp
        a = associate(lm, req)
        assert np.array_equal(lm.cell_snr()[a, req], lm.cell_snr()[:, req].max(axis=0))

    def test_round_trip(self, solved):
        scen, _, plans = solved
        for plan in plans.values():
            back = ActivationPlan.from_dict(plan.to_dict(scen), scen)
            assert np.array_equal(back.active_beams, plan.active_beams)
            assert np.array_equal(back.active_cells, plan.active_cells)
            assert back.to_dict(scen) == plan.to_dict(scen)


def test_deterministic(desk_scenario, desk_link_map, fitted):
    for s in (Strategy.LOCAL_BEAM, Strategy.CELL, Strategy.JOINT):
        a = optimize(s, desk_scenario, fitted, link_map=desk_link_map)
        b = optimize(s, desk_scenario, fitted, link_map=desk_link_map)
        assert a.to_dict(desk_scenario) == b.to_dict(desk_scenario)


def test_threads_do_not_change_local_plan(desk_scenario, desk_link_map, fitted):
    a = optimize_local_beams(desk_scenario, fitted, link_map=desk_link_map, threads=1)
    b = optimize_local_beams(desk_scenario, fitted, link_map=desk_link_map, threads=3)
    assert np.array_equal(a.active_beams, b.active_beams)


def test_greedy_fallback_is_feasible(desk_scenario, desk_link_map, fitted):
    for s in (Strategy.LOCAL_BEAM, Strategy.CELL, Strategy.JOINT):
        plan = optimize(s, desk_scenario, fitted, link_map=desk_link_map, exact_limit=0)
        assert _covered(plan, desk_link_map)
        assert plan.gap >= 0
        if plan.status is SolverStatus.EXACT_OPTIMAL:
            assert plan.gap == 0
