"""Capacity-driven initial deployment.

Each candidate cell picks the multiplexing factor K that balances supply and
demand: ``P(K)`` traffic points reach the SINR needed for rate ``r_t * K``
under equal time sharing, while ``Q(K) = K / a`` points can be served when a
fraction ``a`` of them hosts an active UE. ``K* = argmax_K min(P(K), Q(K))``.
Poles are then chosen to cover a fraction ``alpha`` of all traffic points at
their cells' selected thresholds with as few poles as possible.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .radio import LinkGainMap, compute_link_map
from .scenario import Scenario
from .solver import BinaryProgram, SolverStatus, solve_exact


class RateInfeasible(ValueError):
    """Requested per-user rate needs more spectral efficiency than the cap allows."""


class DeploymentInfeasible(RuntimeError):
    def __init__(self, max_covered, n_tp, target):
        self.max_covered = int(max_covered)
        self.n_tp = int(n_tp)
        self.target = int(target)
        frac = max_covered / n_tp if n_tp else 0.0
        super().__init__(
            f"coverage target {target}/{n_tp} unreachable; all poles together cover {max_covered} ({frac:.4f})"
        )


@dataclass(frozen=True)
class CapacityParams:
    target_rate_mbps: float = 50.0
    activity_factor: float = 0.1
    spectral_efficiency_cap: float = 7.4  # bit/s/Hz
    alpha: float = 0.8
    k_max: int = 64

    def __post_init__(self):
        if not self.target_rate_mbps > 0:
            raise ValueError("target_rate_mbps must be > 0")
        if not 0 < self.activity_factor <= 1:
            raise ValueError("activity_factor must be in (0, 1]")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must be in (0, 1]")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if not self.spectral_efficiency_cap > 0:
            raise ValueError("spectral_efficiency_cap must be > 0")


def sinr_threshold(k, params: CapacityParams, bandwidth_mhz):
    """SINR (dB) giving each of ``k`` time-shared users the target rate (Shannon)."""
    if k < 1:
        raise ValueError("multiplexing factor must be >= 1")
    eta = params.target_rate_mbps * k / bandwidth_mhz
    if eta > params.spectral_efficiency_cap:
        raise RateInfeasible(
            f"K={k} needs {eta:.3f} bit/s/Hz, above the cap of {params.spectral_efficiency_cap}"
        )
    return 10.0 * math.log10(2.0**eta - 1.0)


def k_star_from_table(P, activity_factor):
    """``argmax_K min(P(K), K / a)`` over K = 1..len(P); ties go to the smaller K."""
    P = np.asarray(P, dtype=np.float64)
    if P.size == 0:
        raise ValueError("empty P table")
    K = np.arange(1, P.size + 1)
    Q = K / activity_factor
    served = np.minimum(P, Q)
    return int(K[int(np.argmax(served))])


@dataclass(frozen=True, eq=False)
class CellCapacityProfile:
    cell_id: int
    k: np.ndarray  # 1..k_max (stops early if the rate becomes infeasible)
    sinr_th: np.ndarray  # dB
    P: np.ndarray
    Q: np.ndarray
    k_star: int
    selected_threshold: float

    def to_dict(self):
        return {
            "cell_id": self.cell_id,
            "k_star": self.k_star,
            "selected_threshold_db": round(self.selected_threshold, 6),
            "P": [int(v) for v in self.P],
        }


def _k_range(params, bandwidth_mhz):
    k_cap = int(math.floor(params.spectral_efficiency_cap * bandwidth_mhz / params.target_rate_mbps + 1e-12))
    kmax = min(params.k_max, k_cap)
    if kmax < 1:
        raise RateInfeasible("even K = 1 exceeds the spectral-efficiency cap")
    return np.arange(1, kmax + 1)


def profile_from_sinr(cell_id, sinr_db, params: CapacityParams, bandwidth_mhz):
    """Capacity profile of one cell from its per-point link SINR (dB)."""
    ks = _k_range(params, bandwidth_mhz)
    th = np.array([sinr_threshold(int(k), params, bandwidth_mhz) for k in ks])
    s = np.sort(np.asarray(sinr_db, dtype=np.float64))
    # points with sinr >= th, via a sorted search
    P = s.size - np.searchsorted(s, th, side="left")
    Q = ks / params.activity_factor
    k_star = k_star_from_table(P, params.activity_factor)
    return CellCapacityProfile(int(cell_id), ks, th, P.astype(np.int64), Q, k_star, float(th[k_star - 1]))


def cell_sinr(scenario: Scenario, link_map: LinkGainMap):
    """(C, N) best baseline-beam SNR minus the interference margin."""
    return link_map.cell_snr() - scenario.rf_params.interference_margin


def select_k_star(cell_index, scenario: Scenario, params: CapacityParams, link_map=None) -> CellCapacityProfile:
    link_map = link_map if link_map is not None else compute_link_map(scenario)
    sinr = cell_sinr(scenario, link_map)[cell_index]
    return profile_from_sinr(scenario.cells[cell_index].id, sinr, params, scenario.rf_params.bandwidth_mhz)


# ---------------------------------------------------------------------------
# partial cover over poles
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PartialCoverResult:
    selected: np.ndarray  # bool over columns
    covered: int
    target: int
    status: SolverStatus
    gap: float = 0.0


def coverage_target(alpha, n_tp):
    return int(math.ceil(alpha * n_tp - 1e-9))


def partial_cover_program(cover, target):
    """``min 1.x`` s.t. ``y_g <= sum of columns covering group g`` and ``sum w_g y_g >= target``.

    ``cover`` is (points, columns) bool. Points with identical column sets are
    merged into one group variable weighted by its size.
    """
    cover = np.asarray(cover, dtype=bool)
    n_cols = cover.shape[1]
    reach = cover.any(axis=1)
    groups, weight = np.unique(cover[reach], axis=0, return_counts=True)
    n_g = groups.shape[0]
    n = n_cols + n_g
    link = np.zeros((n_g + 1, n), dtype=np.int64)
    link[:n_g, :n_cols] = groups
    link[np.arange(n_g), n_cols + np.arange(n_g)] = -1
    link[n_g, n_cols:] = weight
    rhs = np.zeros(n_g + 1, dtype=np.int64)
    rhs[n_g] = target
    costs = np.concatenate([np.ones(n_cols), np.zeros(n_g)])
    return BinaryProgram.build(costs, link=link, link_rhs=rhs)


def greedy_partial_cover(cover, target):
    """Most newly covered points first, lowest index on ties."""
    cover = np.asarray(cover, dtype=bool)
    chosen = np.zeros(cover.shape[1], dtype=bool)
    hit = np.zeros(cover.shape[0], dtype=bool)
    while hit.sum() < target:
        gain = cover[~hit].sum(axis=0)
        gain[chosen] = -1
        j = int(np.argmax(gain))
        if gain[j] <= 0:
            return None
        chosen[j] = True
        hit |= cover[:, j]
    return chosen


def solve_partial_cover(cover, alpha, exact_limit=5000, node_limit=1_000_000) -> PartialCoverResult:
    cover = np.asarray(cover, dtype=bool)
    n_tp = cover.shape[0]
    target = coverage_target(alpha, n_tp)
    max_cov = int(cover.any(axis=1).sum())
    if max_cov < target:
        raise DeploymentInfeasible(max_cov, n_tp, target)
    n_cols = cover.shape[1]
    if target == 0:
        return PartialCoverResult(np.zeros(n_cols, dtype=bool), 0, 0, SolverStatus.EXACT_OPTIMAL)
    program = partial_cover_program(cover, target)
    if program.n_vars <= exact_limit:
        res = solve_exact(program, node_limit=node_limit)
        sel = np.asarray(res.x[:n_cols], dtype=bool)
        status, gap = res.status, res.gap
    else:
        sel = greedy_partial_cover(cover, target)
        bound = solve_exact(program, node_limit=1)
        if bound.status is SolverStatus.EXACT_OPTIMAL:
            sel, status, gap = np.asarray(bound.x[:n_cols], dtype=bool), bound.status, 0.0
        else:
            lower = math.ceil(bound.lower_bound - 1e-6) if bound.feasible else 1
            status, gap = SolverStatus.GREEDY_FEASIBLE, max(0.0, float(sel.sum() - lower))
    covered = int(cover[:, sel].any(axis=1).sum())
    return PartialCoverResult(sel, covered, target, status, gap)


@dataclass(frozen=True, eq=False)
class DeploymentResult:
    selected_sites: tuple
    profiles: tuple  # CellCapacityProfile per candidate cell
    covered: int
    n_tp: int
    target: int
    status: SolverStatus
    gap: float
    solve_time: float = field(default=0.0, compare=False)

    @property
    def coverage_fraction(self):
        return self.covered / self.n_tp if self.n_tp else 0.0

    def to_dict(self):
        return {
            "selected_sites": list(self.selected_sites),
            "n_selected": len(self.selected_sites),
            "covered": self.covered,
            "n_tp": self.n_tp,
            "target": self.target,
            "coverage_fraction": round(self.coverage_fraction, 9),
            "status": self.status.value,
            "gap": self.gap,
            "cells": [p.to_dict() for p in self.profiles],
        }

    def to_text(self):
        lines = [
            f"selected poles: {' '.join(str(s) for s in self.selected_sites) or '(none)'}",
            f"coverage: {self.covered}/{self.n_tp} = {self.coverage_fraction:.4f} (target {self.target})",
            f"status: {self.status.value}  gap: {self.gap:g}",
            "cell  K*  threshold_dB  P(K*)",
        ]
        for p in self.profiles:
            lines.append(f"{p.cell_id:4d} {p.k_star:3d} {p.selected_threshold:13.3f} {int(p.P[p.k_star - 1]):6d}")
        return "\n".join(lines) + "\n"


def pole_coverage(scenario: Scenario, profiles, link_map: LinkGainMap):
    """(N_TP, P) bool: a pole covers a point if any of its cells clears that cell's own threshold."""
    sinr = cell_sinr(scenario, link_map)
    th = np.array([p.selected_threshold for p in profiles])
    ok = sinr >= th[:, None]
    site_of = np.array([c.site_id for c in scenario.cells])
    sites = scenario.site_ids()
    return np.stack([ok[site_of == s].any(axis=0) for s in sites], axis=1) if sites else np.zeros((scenario.n_tp, 0), bool)


def solve_deployment(
    scenario: Scenario,
    params: CapacityParams = CapacityParams(),
    link_map=None,
    exact_limit=5000,
    node_limit=1_000_000,
    threads=1,
) -> DeploymentResult:
    """Fewest candidate poles covering ``ceil(alpha * N_TP)`` points at their capacity thresholds."""
    t0 = time.perf_counter()
    link_map = link_map if link_map is not None else compute_link_map(scenario)
    sinr = cell_sinr(scenario, link_map)
    bw = scenario.rf_params.bandwidth_mhz

    def one(i):
        return profile_from_sinr(scenario.cells[i].id, sinr[i], params, bw)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            profiles = tuple(pool.map(one, range(scenario.n_cells)))
    else:
        profiles = tuple(one(i) for i in range(scenario.n_cells))
    cover = pole_coverage(scenario, profiles, link_map)
    res = solve_partial_cover(cover, params.alpha, exact_limit, node_limit)
    sites = scenario.site_ids()
    chosen = tuple(int(sites[j]) for j in np.flatnonzero(res.selected))
    return DeploymentResult(
        chosen, profiles, res.covered, scenario.n_tp, res.target, res.status, res.gap, time.perf_counter() - t0
    )
