"""Idle-mode energy cost of a cell and of a whole activation plan.

Power values are relative units in the style of the 3GPP NES evaluation
framework: active power is split into a static part, equal to micro-sleep
power, and a configuration-dependent dynamic part.

Within one broadcast period the cell transmits all SSB/SIB slots and monitors
all PRACH slots back to back, then sleeps for the remaining idle gap at the
deepest level whose transition time fits the gap. Transition time is billed
at the target level's power.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

MAX_BEAMS = 64


@dataclass(frozen=True)
class PowerConfig:
    p_deep_sleep: float = 1.0
    p_light_sleep: float = 25.0
    p_micro_sleep: float = 55.0
    p_active_dl: float = 280.0
    p_active_ul: float = 110.0
    t_deep_sleep_ms: float = 20.0
    t_light_sleep_ms: float = 6.0
    t_micro_sleep_ms: float = 0.0
    frame_period_ms: float = 20.0
    dl_slots_per_beam: int = 2
    ul_slots_per_beam: int = 1
    slot_duration_ms: float = 0.125

    def __post_init__(self):
        if not (
            self.p_deep_sleep <= self.p_light_sleep <= self.p_micro_sleep <= min(self.p_active_dl, self.p_active_ul)
        ):
            raise ValueError("power levels must satisfy deep <= light <= micro <= min(active DL, active UL)")
        if self.frame_period_ms <= 0 or self.slot_duration_ms <= 0:
            raise ValueError("frame period and slot duration must be positive")
        if min(self.t_deep_sleep_ms, self.t_light_sleep_ms, self.t_micro_sleep_ms) < 0:
            raise ValueError("sleep transition times must be non-negative")
        if self.dl_slots_per_beam < 0 or self.ul_slots_per_beam < 0:
            raise ValueError("slot counts must be non-negative")

    @property
    def p_static(self):
        return self.p_micro_sleep

    def dynamic_power(self, direction="dl"):
        active = self.p_active_dl if direction == "dl" else self.p_active_ul
        return active - self.p_static

    def sleep_levels(self):
        """(power, transition time) pairs, deepest first."""
        return (
            (self.p_deep_sleep, self.t_deep_sleep_ms),
            (self.p_light_sleep, self.t_light_sleep_ms),
            (self.p_micro_sleep, self.t_micro_sleep_ms),
        )

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown power_model field(s): {sorted(unknown)}")
        kw = {}
        for k, v in d.items():
            kw[k] = int(v) if k.endswith("slots_per_beam") else float(v)
        return cls(**kw)


@dataclass(frozen=True)
class FittedCost:
    c_static: float
    m: float
    r_squared: float


def _sleep_power(gap_ms, config):
    for power, t in config.sleep_levels():
        if t <= gap_ms:
            return power
    return config.p_micro_sleep


def idle_cycle_energy(n_beams, config=None):
    """Energy per broadcast period of a cell serving ``n_beams`` SSB beams.

    For ``n_beams == 0`` the cell never wakes, so it sits the whole period at
    the deepest sleep level whose transition fits the period. When the active
    slots exceed the period there is no idle gap left.
    """
    config = config or PowerConfig()
    if isinstance(n_beams, bool) or int(n_beams) != n_beams:
        raise ValueError(f"n_beams must be an integer, got {n_beams!r}")
    n_beams = int(n_beams)
    if n_beams < 0 or n_beams > MAX_BEAMS:
        raise ValueError(f"n_beams must be in [0, {MAX_BEAMS}], got {n_beams}")
    T = config.frame_period_ms
    dl_ms = n_beams * config.dl_slots_per_beam * config.slot_duration_ms
    ul_ms = n_beams * config.ul_slots_per_beam * config.slot_duration_ms
    active = dl_ms * config.p_active_dl + ul_ms * config.p_active_ul
    gap = max(0.0, T - dl_ms - ul_ms)
    if gap == 0.0:
        return active
    return active + gap * _sleep_power(gap, config)


def cost_curve(config=None, n_max=MAX_BEAMS):
    return np.array([idle_cycle_energy(n, config) for n in range(n_max + 1)])


def fit_linear_cost(config=None) -> FittedCost:
    """Least-squares line through C(n), n = 1..64; intercept is c_static, slope is m."""
    curve = cost_curve(config)
    n = np.arange(1, MAX_BEAMS + 1, dtype=np.float64)
    c = curve[1:]
    X = np.column_stack([np.ones_like(n), n])
    (intercept, slope), *_ = np.linalg.lstsq(X, c, rcond=None)
    resid = c - X @ np.array([intercept, slope])
    ss_tot = float(((c - c.mean()) ** 2).sum())
    ss_res = float((resid**2).sum())
    # a flat curve is fitted exactly; report a perfect score rather than 0/0
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return FittedCost(c_static=float(intercept), m=float(slope), r_squared=float(r2))


def network_energy(plan, fitted) -> float:
    """``c_static * active cells + m * active beams`` for an activation plan."""
    cells = np.asarray(plan.active_cells, dtype=bool)
    beams = np.asarray(plan.active_beams, dtype=bool)
    if beams.ndim == 2 and beams.shape[0] == cells.shape[0]:
        orphan = beams.any(axis=1) & ~cells
        if orphan.any():
            raise ValueError(f"beams active in inactive cell(s) {np.flatnonzero(orphan).tolist()}")
    return fitted.c_static * int(cells.sum()) + fitted.m * int(beams.sum())
