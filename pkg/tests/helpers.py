"""Shared builders for the test suite."""
from __future__ import annotations

import math

import numpy as np

from idlenes.energy import PowerConfig
from idlenes.radio import LinkGainMap
from idlenes.scenario import Scenario, make_site
from idlenes.solver import BinaryProgram, activation_links
from idlenes.twin import TwinConfig

# C(n) = 10 + n exactly: one 0.125 ms DL slot per beam at 8.5, flat sleep at 0.5 over 20 ms
LINEAR_POWER = PowerConfig(
    p_deep_sleep=0.5,
    p_light_sleep=0.5,
    p_micro_sleep=0.5,
    p_active_dl=8.5,
    p_active_ul=8.5,
    t_deep_sleep_ms=0.0,
    t_light_sleep_ms=0.0,
    frame_period_ms=20.0,
    dl_slots_per_beam=1,
    ul_slots_per_beam=0,
)


def polar(x0, y0, azimuth_deg, distance):
    a = math.radians(azimuth_deg)
    return (x0 + distance * math.cos(a), y0 + distance * math.sin(a))


def two_cell_desk_scenario():
    """Two far-apart poles; pole 0 needs two narrow beams, pole 1 one.

    At 150 m only Type-1 beams clear -6 dB, and the two points of pole 0 sit
    80 degrees apart inside its first sector, so the joint optimum is two
    cells with three beams: 2 * 10 + 3 * 1 = 23 under ``LINEAR_POWER``.
    """
    cells = make_site(0, 0, 0.0, 0.0, 10.0) + make_site(1, 3, 1000.0, 0.0, 10.0)
    tps = [polar(0, 0, 40, 150), polar(0, 0, -40, 150), polar(1000, 0, 10, 150)]
    return Scenario(cells, tps, power_model=LINEAR_POWER, seed=0)


def desk_config(seed, n_poles=3, size=70.0, res=2.0, **kw):
    """Small street-grid twin used across the suite."""
    kw.setdefault("building_count", 2)
    kw.setdefault("pole_min_spacing", 10.0)
    return TwinConfig(width=size, height=size, n_poles=n_poles, tp_resolution=res, seed=seed, **kw)


def toy_link_map(snr, n_cells, beams_per_cell):
    """Link map over a synthetic pool where every beam counts as baseline."""
    snr = np.asarray(snr, dtype=np.float64)
    base = np.tile(np.arange(beams_per_cell), (n_cells, 1))
    return LinkGainMap(snr=snr, n_cells=n_cells, beams_per_cell=beams_per_cell, baseline_index=base)


def random_program(rng, max_vars=24, link_prob=0.5):
    """Random mixed program: cover rows (rhs 1 or 2) plus optional block activation rows."""
    if rng.random() < link_prob:
        groups = int(rng.integers(1, 4))
        per = int(rng.integers(1, max(2, (max_vars - groups) // groups) + 1))
        per = min(per, (max_vars - groups) // groups)
        n_members = groups * per
        n = n_members + groups
        n_rows = int(rng.integers(1, 8))
        cover = np.zeros((n_rows, n), dtype=bool)
        cover[:, :n_members] = rng.random((n_rows, n_members)) < 0.3
        link = activation_links(groups, per)
        costs = np.concatenate([_costs(rng, n_members), _costs(rng, groups) * 5])
    else:
        n = int(rng.integers(1, max_vars + 1))
        n_rows = int(rng.integers(0, 10))
        cover = rng.random((n_rows, n)) < 0.3
        link = None
        costs = _costs(rng, n)
    rhs = np.where(rng.random(cover.shape[0]) < 0.15, 2, 1)
    return BinaryProgram.build(costs, cover, cover_rhs=rhs, link=link)


def _costs(rng, n):
    kind = rng.integers(3)
    if kind == 0:
        return rng.integers(0, 6, n).astype(np.float64)
    if kind == 1:
        return np.round(rng.uniform(0.1, 5.0, n), 3)
    return np.full(n, float(rng.integers(1, 4)))


def random_cover(rng, n_rows, n_points, density=0.3):
    """Cover matrix (points, rows) in which every point is coverable."""
    A = rng.random((n_points, n_rows)) < density
    empty = ~A.any(axis=1)
    A[empty, rng.integers(0, n_rows, int(empty.sum()))] = True
    return A


def harmonic(n):
    return sum(1.0 / k for k in range(1, n + 1))
