"""UE-side effects of an activation plan, measured against the baseline network.

For every required traffic point: the SNR of its strongest remaining SSB link
and the number of active cells still reaching it at the threshold. Per plan:
the histogram of active beams per cell and how much shorter the worst-case SSB
sweep a UE must search has become.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .nes import ActivationPlan
from .radio import LinkGainMap
from .scenario import BASELINE_CODEBOOK_SIZE, NO_PATH_DB


def _active_snr(plan: ActivationPlan, link_map: LinkGainMap):
    """(C, B, N) view masked to active beams of active cells, others at the sentinel."""
    C, B = plan.active_beams.shape
    mask = plan.active_beams & plan.active_cells[:, None]
    snr = link_map.snr.reshape(C, B, -1)
    return np.where(mask[:, :, None], snr, NO_PATH_DB)


def snr_distribution(plan: ActivationPlan, link_map: LinkGainMap, tp_ids=None):
    """Best active-link SNR (dB) per traffic point (default: the plan's required points)."""
    tp_ids = plan.required_tp if tp_ids is None else np.asarray(tp_ids)
    snr = _active_snr(plan, link_map)[:, :, tp_ids]
    if snr.shape[0] == 0:
        return np.full(len(tp_ids), NO_PATH_DB)
    return snr.max(axis=(0, 1))


def coverage_diversity(plan: ActivationPlan, link_map: LinkGainMap, tp_ids=None):
    """Number of active cells with at least one active beam clearing the threshold, per point."""
    tp_ids = plan.required_tp if tp_ids is None else np.asarray(tp_ids)
    snr = _active_snr(plan, link_map)[:, :, tp_ids]
    return (snr >= plan.threshold_db).any(axis=1).sum(axis=0).astype(np.int64)


def beams_per_cell_histogram(plan: ActivationPlan):
    """counts[k] = number of active cells with exactly k active beams."""
    per_cell = plan.active_beams.sum(axis=1)[plan.active_cells]
    return np.bincount(per_cell, minlength=plan.active_beams.shape[1] + 1)


def search_reduction(plan: ActivationPlan):
    """Baseline codebook size over the largest active codebook of the plan."""
    per_cell = plan.active_beams.sum(axis=1)[plan.active_cells]
    if per_cell.size == 0 or per_cell.max() == 0:
        raise ValueError("plan has no active cell with beams; search reduction is undefined")
    return BASELINE_CODEBOOK_SIZE / int(per_cell.max())


def cdf_grid(samples, grid):
    """Empirical CDF of ``samples`` evaluated at ``grid`` (fraction <= x)."""
    s = np.sort(np.asarray(samples, dtype=np.float64))
    if s.size == 0:
        return np.zeros(len(grid))
    return np.searchsorted(s, grid, side="right") / s.size


@dataclass(frozen=True, eq=False)
class ImpactReport:
    strategy: str
    tp_ids: np.ndarray
    snr_baseline: np.ndarray
    snr_plan: np.ndarray
    diversity_baseline: np.ndarray
    diversity_plan: np.ndarray
    beams_per_cell_histogram: np.ndarray
    search_reduction_factor: float
    threshold_db: float

    @property
    def snr_cdf_baseline(self):
        return np.sort(self.snr_baseline)

    @property
    def snr_cdf_plan(self):
        return np.sort(self.snr_plan)

    def dominance_violations(self):
        """Points where the plan beats the baseline (SNR or diversity) or drops below the threshold."""
        bad = (
            (self.snr_plan > self.snr_baseline)
            | (self.diversity_plan > self.diversity_baseline)
            | (self.snr_plan < self.threshold_db)
        )
        return self.tp_ids[bad]

    def summary(self):
        d_snr = self.snr_baseline - self.snr_plan
        return {
            "strategy": self.strategy,
            "n_tp": int(self.tp_ids.size),
            "threshold_db": self.threshold_db,
            "mean_snr_baseline_db": _r(self.snr_baseline.mean()) if self.tp_ids.size else None,
            "mean_snr_plan_db": _r(self.snr_plan.mean()) if self.tp_ids.size else None,
            "mean_snr_drop_db": _r(d_snr.mean()) if self.tp_ids.size else None,
            "max_snr_drop_db": _r(d_snr.max()) if self.tp_ids.size else None,
            "mean_diversity_baseline": _r(self.diversity_baseline.mean()) if self.tp_ids.size else None,
            "mean_diversity_plan": _r(self.diversity_plan.mean()) if self.tp_ids.size else None,
            "min_diversity_plan": int(self.diversity_plan.min()) if self.tp_ids.size else None,
            "max_beams_per_cell": int(np.flatnonzero(self.beams_per_cell_histogram).max(initial=0)),
            "search_reduction_factor": _r(self.search_reduction_factor),
            "dominance_violations": int(self.dominance_violations().size),
        }

    # -- CSV tables ----------------------------------------------------------

    def per_tp_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["tp_id", "snr_baseline_db", "snr_plan_db", "diversity_baseline", "diversity_plan"])
        for row in zip(self.tp_ids, self.snr_baseline, self.snr_plan, self.diversity_baseline, self.diversity_plan):
            w.writerow([int(row[0]), _fmt(row[1]), _fmt(row[2]), int(row[3]), int(row[4])])
        return buf.getvalue()

    def snr_cdf_csv(self, step_db=0.5):
        if self.tp_ids.size == 0:
            grid = np.zeros(0)
        else:
            lo = np.floor(min(self.snr_plan.min(), self.snr_baseline.min()) / step_db) * step_db
            hi = np.ceil(max(self.snr_plan.max(), self.snr_baseline.max()) / step_db) * step_db
            grid = np.arange(lo, hi + step_db / 2, step_db)
        fb, fp = cdf_grid(self.snr_baseline, grid), cdf_grid(self.snr_plan, grid)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["snr_db", "cdf_baseline", "cdf_plan"])
        for x, a, b in zip(grid, fb, fp):
            w.writerow([_fmt(x), _fmt(a), _fmt(b)])
        return buf.getvalue()

    def diversity_csv(self):
        top = int(max(self.diversity_baseline.max(initial=0), self.diversity_plan.max(initial=0)))
        hb = np.bincount(self.diversity_baseline, minlength=top + 1)
        hp = np.bincount(self.diversity_plan, minlength=top + 1)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["covering_cells", "tp_count_baseline", "tp_count_plan"])
        for k in range(top + 1):
            w.writerow([k, int(hb[k]), int(hp[k])])
        return buf.getvalue()

    def beams_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["active_beams", "cell_count"])
        for k, n in enumerate(self.beams_per_cell_histogram):
            if n:
                w.writerow([k, int(n)])
        return buf.getvalue()

    def write(self, directory, prefix=""):
        """Write the four CSV tables and ``summary.json``; returns the paths written."""
        from pathlib import Path

        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        files = {
            f"{prefix}snr_per_tp.csv": self.per_tp_csv(),
            f"{prefix}snr_cdf.csv": self.snr_cdf_csv(),
            f"{prefix}diversity.csv": self.diversity_csv(),
            f"{prefix}beams_per_cell.csv": self.beams_csv(),
            f"{prefix}summary.json": json.dumps(self.summary(), indent=2, sort_keys=True) + "\n",
        }
        out = []
        for name, text in files.items():
            (d / name).write_text(text)
            out.append(d / name)
        return out


def _r(v):
    return round(float(v), 6)


def _fmt(v):
    return f"{float(v):.6f}"


def analyze(plan: ActivationPlan, baseline: ActivationPlan, link_map: LinkGainMap) -> ImpactReport:
    """Compare ``plan`` against ``baseline`` over the plan's required points."""
    tp = np.asarray(plan.required_tp, dtype=np.int64)
    hist = beams_per_cell_histogram(plan)
    try:
        factor = search_reduction(plan)
    except ValueError:
        factor = float("nan")
    return ImpactReport(
        strategy=plan.strategy.value,
        tp_ids=tp,
        snr_baseline=snr_distribution(baseline, link_map, tp),
        snr_plan=snr_distribution(plan, link_map, tp),
        diversity_baseline=coverage_diversity(baseline, link_map, tp),
        diversity_plan=coverage_diversity(plan, link_map, tp),
        beams_per_cell_histogram=hist,
        search_reduction_factor=factor,
        threshold_db=plan.threshold_db,
    )
