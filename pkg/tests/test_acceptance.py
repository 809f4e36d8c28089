"""Headline acceptance criteria, one test per criterion.

Each test carries ``@pytest.mark.acceptance(<name>)``; conftest prints a
PASS/FAIL line per criterion at the end of the run.
"""
import json
import time

import numpy as np
import pytest

from helpers import desk_config, harmonic, random_cover, random_program, toy_link_map, two_cell_desk_scenario
from kstar_fixtures import KSTAR_FIXTURES, sinr_samples_for
from idlenes import cli
from idlenes.deployment import CapacityParams, select_k_star, sinr_threshold
from idlenes.energy import PowerConfig, cost_curve, fit_linear_cost
from idlenes.impact import analyze, coverage_diversity, search_reduction
from idlenes.nes import ActivationPlan, Strategy, optimize, optimize_joint, uncovered_points
from idlenes.radio import compute_link_map
from idlenes.scenario import Scenario, make_site
from idlenes.solver import (
    BinaryProgram,
    SolverStatus,
    brute_force_indicator,
    brute_force_oracle,
    indicator_cell_enumeration,
    solve_exact,
    solve_greedy,
)
from idlenes.twin import generate

N_SCENARIOS = 60
DENSE_DIVERSITY = 2.0


def _scenario_params(i):
    rng = np.random.default_rng(1000 + i)
    n_poles = int(rng.integers(2, 5))
    size = float(rng.choice([60.0, 70.0, 80.0]))
    res = float(rng.choice([2.0, 3.0]))
    buildings = int(rng.integers(0, 4))
    return desk_config(1000 + i, n_poles=n_poles, size=size, res=res, building_count=buildings)


@pytest.fixture(scope="module")
def solved_set():
    """Every strategy solved on the random desk-scale scenario set."""
    fitted = fit_linear_cost()
    out = []
    for i in range(N_SCENARIOS):
        scen = generate(_scenario_params(i))
        lm = compute_link_map(scen)
        plans = {s: optimize(s, scen, fitted, link_map=lm) for s in Strategy}
        out.append((scen, lm, plans))
    return fitted, out


def _all_plans(solved_set):
    for scen, lm, plans in solved_set[1]:
        for plan in plans.values():
            yield scen, lm, plans[Strategy.BASELINE], plan


@pytest.mark.acceptance("oracle exactness")
def test_oracle_exactness(record_property):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    mismatches, feasible = [], 0
    for k in range(250):
        prog = random_program(rng, max_vars=24)
        bf, ex = brute_force_oracle(prog), solve_exact(prog)
        if bf.feasible:
            feasible += 1
            ok = ex.status is SolverStatus.EXACT_OPTIMAL and ex.objective == bf.objective
        else:
            ok = ex.status is SolverStatus.INFEASIBLE
        if not ok:
            mismatches.append(k)
    elapsed = time.perf_counter() - start
    record_property("detail", f"250 programs ({feasible} feasible), {len(mismatches)} mismatches, {elapsed:.1f} s")
    assert mismatches == []
    assert elapsed <= 60.0


@pytest.mark.acceptance("coverage feasibility")
def test_coverage_feasibility(solved_set, record_property):
    extra = two_cell_desk_scenario()
    extra_lm = compute_link_map(extra)
    fitted = fit_linear_cost(extra.power_model)
    extra_plans = [optimize(s, extra, fitted, link_map=extra_lm) for s in Strategy]
    checked, violations = 0, 0
    for _, lm, _, plan in _all_plans(solved_set):
        violations += uncovered_points(plan, lm).size
        checked += 1
    for plan in extra_plans:
        violations += uncovered_points(plan, extra_lm).size
        checked += 1
    record_property("detail", f"{checked} plans, {violations} uncovered required points")
    assert violations == 0


@pytest.mark.acceptance("dominance ordering")
def test_dominance(solved_set, record_property):
    _, solved = solved_set
    violations, inexact, dense, dense_saving = [], 0, 0, 0
    for i, (scen, lm, plans) in enumerate(solved):
        assert scen.n_tp <= 2500 and len(scen.site_ids()) <= 12
        e = {s: p.objective_value for s, p in plans.items()}
        inexact += sum(p.status is not SolverStatus.EXACT_OPTIMAL for p in plans.values())
        # rounding slack only: the energies are sums of the same few floats in different orders
        tol = 1e-9 * e[Strategy.BASELINE]
        if not (
            e[Strategy.JOINT] <= e[Strategy.CELL] + tol
            and e[Strategy.JOINT] <= e[Strategy.LOCAL_BEAM] + tol
            and e[Strategy.LOCAL_BEAM] <= e[Strategy.BASELINE] + tol
        ):
            violations.append(i)
        base = plans[Strategy.BASELINE]
        if coverage_diversity(base, lm).mean() >= DENSE_DIVERSITY:
            dense += 1
            dense_saving += e[Strategy.JOINT] < e[Strategy.BASELINE]
    record_property(
        "detail",
        f"{len(solved)} scenarios, {len(violations)} ordering violations, {inexact} inexact solves, "
        f"positive joint saving on {dense_saving}/{dense} dense scenarios",
    )
    assert inexact == 0
    assert violations == []
    assert dense > 0 and dense_saving >= 0.8 * dense


@pytest.mark.acceptance("linearization correctness")
def test_linearization(solved_set, record_property):
    fitted, solved = solved_set
    mismatches = []
    for i, (_, lm, plans) in enumerate(solved):
        joint = plans[Strategy.JOINT]
        cover = (lm.snr[:, joint.required_tp] >= joint.threshold_db).T
        beam_cell = np.repeat(np.arange(lm.n_cells), lm.beams_per_cell)
        ref = indicator_cell_enumeration(cover, beam_cell, fitted.c_static, fitted.m)
        if joint.objective_value != ref.objective:
            mismatches.append(("twin", i))
    # small pools where every beam subset is enumerated directly
    rng = np.random.default_rng(77)
    for k in range(40):
        n_cells, bpc = int(rng.integers(1, 4)), int(rng.integers(1, 9))
        snr = np.where(rng.random((n_cells * bpc, int(rng.integers(1, 12)))) < 0.3, 0.0, -999.0)
        snr[rng.integers(0, n_cells * bpc, snr.shape[1]), np.arange(snr.shape[1])] = 0.0
        lm = toy_link_map(snr, n_cells, bpc)
        plan = optimize_joint(None, fitted, 0.0, link_map=lm)
        ref = brute_force_indicator(snr.T >= 0.0, np.repeat(np.arange(n_cells), bpc), fitted.c_static, fitted.m)
        if plan.objective_value != ref.objective:
            mismatches.append(("toy", k))
    record_property("detail", f"{len(solved)} twins + 40 exhaustive toys, {len(mismatches)} mismatches")
    assert mismatches == []


@pytest.mark.acceptance("energy model shape")
def test_energy_shape(record_property):
    curve = cost_curve(PowerConfig())
    fit = fit_linear_cost(PowerConfig())
    record_property("detail", f"c_static={fit.c_static:.2f}, m={fit.m:.3f}, r_squared={fit.r_squared:.5f}")
    assert curve.shape == (65,)
    assert np.all(np.diff(curve) >= 0)
    assert fit.r_squared >= 0.99


@pytest.mark.acceptance("K* rule")
def test_k_star(record_property):
    margin = 3.0
    wrong = []
    for P, a, expected in KSTAR_FIXTURES:
        params = CapacityParams(activity_factor=a, k_max=len(P))
        scen = Scenario(make_site(0, 0, 0.0, 0.0, 10.0), [(float(j), 0.0) for j in range(max(P[0], 1))])
        bw = scen.rf_params.bandwidth_mhz
        assert scen.rf_params.interference_margin == margin
        th = [sinr_threshold(k, params, bw) for k in range(1, len(P) + 1)]
        samples = np.array(sinr_samples_for(P, th))
        snr = np.full((3, scen.n_tp), -999.0)
        snr[0, : samples.size] = samples + margin
        lm = toy_link_map(snr, n_cells=3, beams_per_cell=1)
        prof = select_k_star(0, scen, params, lm)
        if prof.k_star != expected or prof.P.tolist() != P:
            wrong.append((P, a))
    record_property("detail", f"{len(KSTAR_FIXTURES)} fixtures, {len(wrong)} wrong")
    assert wrong == []


@pytest.mark.acceptance("impact dominance")
def test_impact_dominance(solved_set, record_property):
    checked, bad = 0, 0
    for _, lm, base, plan in _all_plans(solved_set):
        rep = analyze(plan, base, lm)
        checked += 1
        bad += int(not (rep.snr_plan <= rep.snr_baseline).all())
        bad += int(not (rep.diversity_plan <= rep.diversity_baseline).all())
    beams = np.zeros((2, 72), dtype=bool)
    beams[0, :9] = True
    beams[1, :4] = True
    nine = ActivationPlan(
        Strategy.JOINT, np.ones(2, dtype=bool), beams, 0.0, SolverStatus.EXACT_OPTIMAL, 0.0, -6.0, np.arange(0)
    )
    factor = search_reduction(nine)
    record_property("detail", f"{checked} plans, {bad} violations, 32->9 beams reduction {factor:.10f}")
    assert bad == 0
    assert abs(factor - 32 / 9) <= 1e-9


@pytest.mark.acceptance("greedy quality")
def test_greedy_quality(record_property):
    rng = np.random.default_rng(31)
    worst, bad = 0.0, 0
    for _ in range(150):
        n_rows = int(rng.integers(1, 25))
        n_pts = int(rng.integers(1, 40))
        A = random_cover(rng, n_rows, n_pts, density=float(rng.choice([0.1, 0.2, 0.4])))
        costs = np.round(rng.uniform(0.1, 5.0, n_rows), 3)
        prog = BinaryProgram.build(costs, A)
        g, bf = solve_greedy(prog), brute_force_oracle(prog)
        worst = max(worst, g.objective / bf.objective)
        bad += int(g.objective > harmonic(n_pts) * bf.objective + 1e-9)
    record_property("detail", f"150 cover instances, {bad} over the H(N) bound, worst greedy/exact = {worst:.3f}")
    assert bad == 0


@pytest.mark.acceptance("determinism")
def test_determinism(tmp_path, record_property):
    cfg = tmp_path / "twin.json"
    cfg.write_text(json.dumps({"width": 70, "height": 70, "n_poles": 3, "tp_resolution": 2, "seed": 11}))
    assert cli.main(["generate", "--config", str(cfg), "--out", str(tmp_path / "gen")]) == 0
    scen = tmp_path / "gen" / "scenario.json"
    first = tmp_path / "first"
    assert cli.main(["compare", "--scenario", str(scen), "--out", str(first)]) == 0
    manifest = first / "manifest.json"
    replays = [tmp_path / "replay1", tmp_path / "replay2"]
    for out in replays:
        assert cli.main(["replay", "--manifest", str(manifest), "--out", str(out)]) == 0
    names = sorted(p.name for p in (first / "plans").glob("*.json"))
    differing = [
        (out.name, n) for out in replays for n in names if (out / "plans" / n).read_bytes() != (first / "plans" / n).read_bytes()
    ]
    record_property("detail", f"{len(names)} plan files x {len(replays)} replays, {len(differing)} differ")
    assert len(names) == 4
    assert differing == []
