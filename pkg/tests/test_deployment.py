import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import desk_config, random_cover
from kstar_fixtures import KSTAR_FIXTURES, sinr_samples_for
from idlenes.deployment import (
    CapacityParams,
    DeploymentInfeasible,
    RateInfeasible,
    coverage_target,
    greedy_partial_cover,
    k_star_from_table,
    pole_coverage,
    profile_from_sinr,
    select_k_star,
    sinr_threshold,
    solve_deployment,
    solve_partial_cover,
)
from idlenes.radio import compute_link_map
from idlenes.scenario import Scenario, make_site
from idlenes.solver import SolverStatus
from idlenes.twin import generate

BW = 800.0


def _cover(cols, n_points):
    A = np.zeros((n_points, len(cols)), dtype=bool)
    for j, pts in enumerate(cols):
        A[list(pts), j] = True
    return A


def _brute_min_poles(A, target):
    n = A.shape[1]
    for size in range(n + 1):
        for S in itertools.combinations(range(n), size):
            if A[:, list(S)].any(axis=1).sum() >= target:
                return size
    return None


class TestThreshold:
    def test_unit_efficiency(self):
        assert sinr_threshold(16, CapacityParams(), BW) == pytest.approx(0.0, abs=1e-12)

    def test_rate_times_k_equals_bandwidth(self):
        assert sinr_threshold(1, CapacityParams(target_rate_mbps=800.0), BW) == pytest.approx(0.0, abs=1e-12)

    def test_shannon(self):
        eta = 50 * 3 / BW
        assert sinr_threshold(3, CapacityParams(), BW) == pytest.approx(10 * math.log10(2**eta - 1))

    def test_above_cap(self):
        with pytest.raises(RateInfeasible):
            sinr_threshold(200, CapacityParams(), BW)

    def test_k_zero(self):
        with pytest.raises(ValueError):
            sinr_threshold(0, CapacityParams(), BW)

    @pytest.mark.parametrize(
        "kw", [dict(target_rate_mbps=0), dict(activity_factor=0), dict(activity_factor=1.5), dict(alpha=0)]
    )
    def test_params_validated(self, kw):
        with pytest.raises(ValueError):
            CapacityParams(**kw)


class TestKStar:
    def test_example(self):
        assert k_star_from_table([50, 30, 12], 0.1) == 2

    def test_all_zero(self):
        assert k_star_from_table([0, 0, 0], 0.1) == 1

    def test_full_activity(self):
        prof = profile_from_sinr(0, [20.0] * 4, CapacityParams(activity_factor=1.0, k_max=3), BW)
        assert prof.Q.tolist() == [1, 2, 3]
        assert min(prof.P[0], prof.Q[0]) == 1
        assert prof.k_star == 3

    @pytest.mark.parametrize("P, a, expected", KSTAR_FIXTURES)
    def test_table(self, P, a, expected):
        assert k_star_from_table(P, a) == expected

    @pytest.mark.parametrize("P, a, expected", KSTAR_FIXTURES[:6])
    def test_from_samples(self, P, a, expected):
        params = CapacityParams(activity_factor=a, k_max=len(P))
        th = [sinr_threshold(k, params, BW) for k in range(1, len(P) + 1)]
        prof = profile_from_sinr(0, sinr_samples_for(P, th), params, BW)
        assert prof.P.tolist() == P
        assert prof.k_star == expected
        assert prof.selected_threshold == th[expected - 1]

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-30, 40), max_size=60), st.sampled_from([0.02, 0.1, 0.5, 1.0]))
    def test_profile_properties(self, sinr, a):
        prof = profile_from_sinr(0, sinr, CapacityParams(activity_factor=a), BW)
        assert np.all(np.diff(prof.P) <= 0)
        assert np.all(np.diff(prof.Q) >= 0)
        served = np.minimum(prof.P, prof.Q)
        assert served[prof.k_star - 1] == served.max()
        assert np.all(served[: prof.k_star - 1] < served.max())

    def test_unreachable_cell(self):
        cells = make_site(0, 0, 0.0, 0.0, 10.0)
        scen = Scenario(cells, [(500.0, 500.0)])
        prof = select_k_star(0, scen, CapacityParams())
        assert prof.k_star == 1 and not prof.P.any()

    def test_k_range_capped_by_efficiency(self):
        prof = profile_from_sinr(0, [10.0], CapacityParams(target_rate_mbps=400.0), BW)
        assert prof.k.tolist() == list(range(1, 15))  # 7.4 * 800 / 400 = 14.8


class TestPartialCover:
    def test_example(self):
        A = _cover([{0, 1, 2}, {2, 3}, {3}], 4)
        res = solve_partial_cover(A, 0.75)
        assert res.selected.tolist() == [True, False, False] and res.covered == 3

    def test_one_pole_everything(self):
        res = solve_partial_cover(_cover([{0}, {0, 1, 2}, {2}], 3), 1.0)
        assert res.selected.tolist() == [False, True, False]

    def test_infeasible_reports_max(self):
        with pytest.raises(DeploymentInfeasible) as exc:
            solve_partial_cover(_cover([{0}, {1}], 3), 1.0)
        assert exc.value.max_covered == 2 and exc.value.target == 3

    def test_target_rounds_up(self):
        assert coverage_target(0.8, 10) == 8
        assert coverage_target(0.81, 10) == 9
        assert coverage_target(0.7, 10) == 7  # 0.7 * 10 is 7.000000000000001 in floating point

    @pytest.mark.parametrize("seed", range(40))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n_poles = int(rng.integers(1, 16))
        A = random_cover(rng, n_poles, int(rng.integers(1, 30)), density=0.2)
        alpha = float(rng.choice([0.5, 0.75, 0.8, 0.9, 1.0]))
        res = solve_partial_cover(A, alpha)
        target = coverage_target(alpha, A.shape[0])
        assert res.status is SolverStatus.EXACT_OPTIMAL
        assert res.selected.sum() == _brute_min_poles(A, target)
        assert res.covered >= target
        # minimality witness
        for j in np.flatnonzero(res.selected):
            keep = res.selected.copy()
            keep[j] = False
            assert A[:, keep].any(axis=1).sum() < target

    def test_greedy_path(self):
        rng = np.random.default_rng(3)
        A = random_cover(rng, 12, 40, density=0.2)
        res = solve_partial_cover(A, 0.9, exact_limit=0)
        assert res.covered >= res.target and res.gap >= 0
        assert greedy_partial_cover(A, res.target) is not None


@pytest.fixture(scope="module")
def deployed():
    scen = generate(desk_config(5, n_poles=5, size=80))
    lm = compute_link_map(scen)
    return scen, lm, solve_deployment(scen, CapacityParams(alpha=0.8), link_map=lm)


class TestDeployment:
    def test_target_met(self, deployed):
        scen, _, res = deployed
        assert res.covered >= res.target == coverage_target(0.8, scen.n_tp)
        assert res.status is SolverStatus.EXACT_OPTIMAL

    def test_optimal_against_brute_force(self, deployed):
        scen, lm, res = deployed
        A = pole_coverage(scen, res.profiles, lm)
        assert len(res.selected_sites) == _brute_min_poles(A, res.target)

    def test_profiles_per_cell(self, deployed):
        scen, _, res = deployed
        assert [p.cell_id for p in res.profiles] == [c.id for c in scen.cells]

    def test_threads(self, deployed):
        scen, lm, res = deployed
        again = solve_deployment(scen, CapacityParams(alpha=0.8), link_map=lm, threads=2)
        assert again.to_dict() == res.to_dict()

    def test_report(self, deployed):
        text = deployed[2].to_text()
        assert text.startswith("selected poles:") and "K*" in text

    def test_select_k_star_matches_table(self, deployed):
        scen, lm, res = deployed
        prof = select_k_star(2, scen, CapacityParams(), lm)
        assert prof.k_star == k_star_from_table(prof.P, 0.1)
        assert prof.k_star == res.profiles[2].k_star
