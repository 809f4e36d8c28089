"""Immutable world description shared by every other module.

A :class:`Scenario` holds the cells (three per site), their SSB beam pools,
the outdoor traffic-point grid, blockers and the RF link-budget parameters.
Scenarios serialize to a single JSON document; see :func:`Scenario.to_dict`.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .energy import PowerConfig

UE_HEIGHT_M = 1.5
NO_PATH_DB = -999.0

AZ_SPAN = (-60.0, 60.0)
EL_SPAN = (-30.0, 0.0)
BASELINE_CODEBOOK_SIZE = 32
MAX_SSB_BEAMS = 64
ISOTROPIC_SOLID_ANGLE_DEG2 = 41253.0


class BeamType(enum.IntEnum):
    TYPE1 = 1
    TYPE2 = 2
    TYPE3 = 3
    TYPE4 = 4

    @property
    def widths(self):
        return BEAM_WIDTHS[self]


# (azimuth width, elevation width) in degrees
BEAM_WIDTHS = {
    BeamType.TYPE1: (15.0, 7.5),
    BeamType.TYPE2: (15.0, 15.0),
    BeamType.TYPE3: (30.0, 7.5),
    BeamType.TYPE4: (30.0, 15.0),
}


def beam_peak_gain(az_width, el_width, max_array_gain):
    """Elliptical-aperture peak gain ``10 log10(41253 / (bw_az bw_el))`` capped at the array maximum."""
    return min(10.0 * math.log10(ISOTROPIC_SOLID_ANGLE_DEG2 / (az_width * el_width)), max_array_gain)


@dataclass(frozen=True)
class TrafficPoint:
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class BeamSpec:
    beam_type: BeamType
    azimuth_center: float
    elevation_center: float
    azimuth_width: float
    elevation_width: float
    peak_gain: float

    def as_row(self):
        return (self.azimuth_center, self.elevation_center, self.azimuth_width, self.elevation_width, self.peak_gain)

    def to_dict(self):
        d = asdict(self)
        d["beam_type"] = int(self.beam_type)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            beam_type=BeamType(int(d["beam_type"])),
            azimuth_center=float(d["azimuth_center"]),
            elevation_center=float(d["elevation_center"]),
            azimuth_width=float(d["azimuth_width"]),
            elevation_width=float(d["elevation_width"]),
            peak_gain=float(d["peak_gain"]),
        )


def _grid_beams(beam_type, max_array_gain):
    az_w, el_w = BEAM_WIDTHS[beam_type]
    gain = beam_peak_gain(az_w, el_w, max_array_gain)
    n_az = int(round((AZ_SPAN[1] - AZ_SPAN[0]) / az_w))
    n_el = int(round((EL_SPAN[1] - EL_SPAN[0]) / el_w))
    beams = []
    # elevation rows from the horizon downwards, azimuth left to right
    for i in range(n_el):
        el = EL_SPAN[1] - (i + 0.5) * el_w
        for k in range(n_az):
            az = AZ_SPAN[0] + (k + 0.5) * az_w
            beams.append(BeamSpec(beam_type, az, el, az_w, el_w, gain))
    return beams


def baseline_codebook(max_array_gain=28.15):
    """The 32-beam Type-1 grid (8 azimuth x 4 elevation) tiling the cell span."""
    return tuple(_grid_beams(BeamType.TYPE1, max_array_gain))


def candidate_beam_pool(max_array_gain=28.15):
    """All grid-aligned placements of the four beam types: 32 + 16 + 16 + 8 = 72 beams.

    The first 32 entries are the baseline codebook, in the same order.
    """
    pool = []
    for t in BeamType:
        pool.extend(_grid_beams(t, max_array_gain))
    return tuple(pool)


@dataclass(frozen=True)
class Cell:
    id: int
    site_id: int
    boresight_azimuth: float
    x: float
    y: float
    height: float
    tx_power: float
    max_array_gain: float
    baseline_codebook: tuple
    candidate_beam_pool: tuple

    @property
    def position(self):
        return (self.x, self.y, self.height)

    def baseline_pool_indices(self):
        """Positions of the baseline codebook beams inside ``candidate_beam_pool``."""
        lookup = {b: i for i, b in enumerate(self.candidate_beam_pool)}
        return np.array([lookup[b] for b in self.baseline_codebook], dtype=np.int64)

    def to_dict(self):
        return {
            "id": self.id,
            "site_id": self.site_id,
            "boresight_azimuth": self.boresight_azimuth,
            "position": [self.x, self.y, self.height],
            "tx_power": self.tx_power,
            "max_array_gain": self.max_array_gain,
            "baseline_codebook": [b.to_dict() for b in self.baseline_codebook],
            "candidate_beam_pool": [b.to_dict() for b in self.candidate_beam_pool],
        }

    @classmethod
    def from_dict(cls, d):
        x, y, h = d["position"]
        return cls(
            id=int(d["id"]),
            site_id=int(d["site_id"]),
            boresight_azimuth=float(d["boresight_azimuth"]),
            x=float(x),
            y=float(y),
            height=float(h),
            tx_power=float(d["tx_power"]),
            max_array_gain=float(d["max_array_gain"]),
            baseline_codebook=tuple(BeamSpec.from_dict(b) for b in d["baseline_codebook"]),
            candidate_beam_pool=tuple(BeamSpec.from_dict(b) for b in d["candidate_beam_pool"]),
        )


def make_site(site_id, first_cell_id, x, y, height, first_boresight=0.0, tx_power=10.0, max_array_gain=28.15):
    """Three sector cells at one pole, boresights 120 degrees apart."""
    base = baseline_codebook(max_array_gain)
    pool = candidate_beam_pool(max_array_gain)
    return [
        Cell(
            id=first_cell_id + k,
            site_id=site_id,
            boresight_azimuth=float((first_boresight + 120.0 * k) % 360.0),
            x=float(x),
            y=float(y),
            height=float(height),
            tx_power=float(tx_power),
            max_array_gain=float(max_array_gain),
            baseline_codebook=base,
            candidate_beam_pool=pool,
        )
        for k in range(3)
    ]


@dataclass(frozen=True)
class Building:
    x0: float
    y0: float
    x1: float
    y1: float
    height: float


@dataclass(frozen=True)
class Foliage:
    x0: float
    y0: float
    x1: float
    y1: float


@dataclass(frozen=True)
class RFParams:
    """Link-budget inputs; defaults are the 28 GHz digital-twin values."""

    carrier_ghz: float = 28.0
    bandwidth_mhz: float = 800.0
    ue_gain: float = 10.0
    body_loss: float = 8.0
    implementation_margin: float = 1.9
    noise_figure_ue: float = 6.7
    noise_figure_cell: float = 10.0
    cell_edge_reliability_margin: float = 13.2
    foliage_loss_per_m: float = 4.0
    reflection_loss: float = 6.4
    thermal_noise_density: float = -174.0
    sidelobe_drop: float = 20.0
    interference_margin: float = 3.0
    ue_height: float = UE_HEIGHT_M

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown rf_params field(s): {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})


@dataclass(frozen=True, eq=False)
class Scenario:
    cells: tuple
    traffic_points: np.ndarray  # (N, 2) float64, row i is traffic point id i
    buildings: tuple = ()
    foliage: tuple = ()
    rf_params: RFParams = field(default_factory=RFParams)
    power_model: PowerConfig = field(default_factory=PowerConfig)
    seed: int = 0

    def __post_init__(self):
        tp = np.asarray(self.traffic_points, dtype=np.float64).reshape(-1, 2)
        tp.setflags(write=False)
        object.__setattr__(self, "traffic_points", tp)
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "buildings", tuple(self.buildings))
        object.__setattr__(self, "foliage", tuple(self.foliage))

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def n_tp(self):
        return self.traffic_points.shape[0]

    @property
    def beams_per_cell(self):
        return len(self.cells[0].candidate_beam_pool) if self.cells else 0

    def traffic_point(self, i):
        x, y = self.traffic_points[i]
        return TrafficPoint(int(i), float(x), float(y))

    def site_ids(self):
        return sorted({c.site_id for c in self.cells})

    def with_sites(self, site_ids):
        """Sub-scenario keeping only the given sites; cell ids are renumbered densely."""
        keep = set(site_ids)
        cells = []
        for c in self.cells:
            if c.site_id in keep:
                cells.append(replace(c, id=len(cells)))
        return replace(self, cells=tuple(cells))

    def to_dict(self):
        return {
            "cells": [c.to_dict() for c in self.cells],
            "traffic_points": [[float(x), float(y)] for x, y in self.traffic_points],
            "blockers": {
                "buildings": [asdict(b) for b in self.buildings],
                "foliage": [asdict(f) for f in self.foliage],
            },
            "rf_params": asdict(self.rf_params),
            "power_model": self.power_model.to_dict(),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d):
        blockers = d.get("blockers", {})
        return cls(
            cells=tuple(Cell.from_dict(c) for c in d["cells"]),
            traffic_points=np.array(d["traffic_points"], dtype=np.float64).reshape(-1, 2),
            buildings=tuple(Building(**{k: float(v) for k, v in b.items()}) for b in blockers.get("buildings", [])),
            foliage=tuple(Foliage(**{k: float(v) for k, v in f.items()}) for f in blockers.get("foliage", [])),
            rf_params=RFParams.from_dict(d.get("rf_params", {})),
            power_model=PowerConfig.from_dict(d["power_model"]) if "power_model" in d else PowerConfig(),
            seed=int(d.get("seed", 0)),
        )

    def dumps(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.cells == other.cells
            and np.array_equal(self.traffic_points, other.traffic_points)
            and self.buildings == other.buildings
            and self.foliage == other.foliage
            and self.rf_params == other.rf_params
            and self.power_model == other.power_model
            and self.seed == other.seed
        )

    __hash__ = None


def total_baseline_beams(scenario):
    return sum(len(c.baseline_codebook) for c in scenario.cells)


@dataclass(frozen=True)
class Violation:
    entity: str
    invariant: str

    def __str__(self):
        return f"{self.entity}: {self.invariant}"


def _beam_violations(where, beam, max_gain):
    out = []
    if (beam.azimuth_width, beam.elevation_width) != BEAM_WIDTHS.get(beam.beam_type):
        out.append(Violation(where, f"beam widths do not match {beam.beam_type.name}"))
    tol = 1e-9
    if (
        beam.azimuth_center - beam.azimuth_width / 2 < AZ_SPAN[0] - tol
        or beam.azimuth_center + beam.azimuth_width / 2 > AZ_SPAN[1] + tol
        or beam.elevation_center - beam.elevation_width / 2 < EL_SPAN[0] - tol
        or beam.elevation_center + beam.elevation_width / 2 > EL_SPAN[1] + tol
    ):
        out.append(Violation(where, "beam footprint outside the 120x30 degree cell span"))
    if beam.peak_gain > max_gain + tol:
        out.append(Violation(where, "peak gain exceeds the cell's maximum array gain"))
    return out


def validate(scenario) -> list:
    """Check every structural invariant; returns a (possibly empty) list of :class:`Violation`."""
    out = []
    for i, c in enumerate(scenario.cells):
        if c.id != i:
            out.append(Violation(f"cell[{i}]", f"cell ids must be dense, found id {c.id}"))
        where = f"cell {c.id}"
        if len(c.baseline_codebook) != BASELINE_CODEBOOK_SIZE:
            out.append(Violation(where, f"baseline codebook has {len(c.baseline_codebook)} beams, expected 32"))
        if any(b.beam_type != BeamType.TYPE1 for b in c.baseline_codebook):
            out.append(Violation(where, "baseline codebook must contain Type1 beams only"))
        if len(set(c.baseline_codebook)) != len(c.baseline_codebook):
            out.append(Violation(where, "baseline codebook has duplicate beams"))
        if not set(c.baseline_codebook) <= set(c.candidate_beam_pool):
            out.append(Violation(where, "baseline codebook is not a subset of the candidate beam pool"))
        if len(c.candidate_beam_pool) > 0 and len(c.candidate_beam_pool) != scenario.beams_per_cell:
            out.append(Violation(where, "candidate beam pools must have equal size across cells"))
        for k, b in enumerate(c.candidate_beam_pool):
            out.extend(_beam_violations(f"{where} beam {k}", b, c.max_array_gain))
        for k, b in enumerate(c.baseline_codebook):
            if b not in c.candidate_beam_pool:
                out.extend(_beam_violations(f"{where} baseline beam {k}", b, c.max_array_gain))
    sites = {}
    for c in scenario.cells:
        sites.setdefault(c.site_id, []).append(c)
    for sid, cells in sorted(sites.items()):
        if len(cells) != 3:
            out.append(Violation(f"site {sid}", f"site sector count is {len(cells)}, expected 3"))
            continue
        bores = sorted(c.boresight_azimuth % 360.0 for c in cells)
        gaps = [bores[1] - bores[0], bores[2] - bores[1], 360.0 - bores[2] + bores[0]]
        if any(abs(g - 120.0) > 1e-6 for g in gaps):
            out.append(Violation(f"site {sid}", "sector boresights are not 120 degrees apart"))
        if len({(c.x, c.y, c.height) for c in cells}) != 1:
            out.append(Violation(f"site {sid}", "sector cells are not co-located"))
    tp = scenario.traffic_points
    if tp.size and len(np.unique(tp, axis=0)) != len(tp):
        out.append(Violation("traffic_points", "positions are not unique"))
    if not np.all(np.isfinite(tp)):
        out.append(Violation("traffic_points", "non-finite position"))
    for k, b in enumerate(scenario.buildings):
        if not (b.x1 > b.x0 and b.y1 > b.y0 and b.height > 0):
            out.append(Violation(f"building {k}", "degenerate footprint or height"))
        elif tp.size:
            inside = (tp[:, 0] > b.x0) & (tp[:, 0] < b.x1) & (tp[:, 1] > b.y0) & (tp[:, 1] < b.y1)
            if inside.any():
                out.append(Violation(f"building {k}", "traffic point inside building footprint"))
    rf = scenario.rf_params
    for name in (
        "body_loss",
        "implementation_margin",
        "noise_figure_ue",
        "cell_edge_reliability_margin",
        "foliage_loss_per_m",
        "reflection_loss",
        "sidelobe_drop",
        "interference_margin",
    ):
        if getattr(rf, name) < 0:
            out.append(Violation("rf_params", f"{name} must be non-negative"))
    if rf.bandwidth_mhz <= 0:
        out.append(Violation("rf_params", "bandwidth must be positive"))
    return out


def tile_coverage_ok(codebook) -> bool:
    """True when the beams' footprints tile the cell span exactly (area match, no interior overlap)."""
    span_area = (AZ_SPAN[1] - AZ_SPAN[0]) * (EL_SPAN[1] - EL_SPAN[0])
    boxes = [
        (
            b.azimuth_center - b.azimuth_width / 2,
            b.azimuth_center + b.azimuth_width / 2,
            b.elevation_center - b.elevation_width / 2,
            b.elevation_center + b.elevation_width / 2,
        )
        for b in codebook
    ]
    area = sum((a1 - a0) * (e1 - e0) for a0, a1, e0, e1 in boxes)
    if abs(area - span_area) > 1e-9:
        return False
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            a, b = boxes[i], boxes[j]
            if min(a[1], b[1]) - max(a[0], b[0]) > 1e-9 and min(a[3], b[3]) - max(a[2], b[2]) > 1e-9:
                return False
    return all(
        a0 >= AZ_SPAN[0] - 1e-9 and a1 <= AZ_SPAN[1] + 1e-9 and e0 >= EL_SPAN[0] - 1e-9 and e1 <= EL_SPAN[1] + 1e-9
        for a0, a1, e0, e1 in boxes
    )


def cell_at(scenario, cell_id) -> Optional[Cell]:
    for c in scenario.cells:
        if c.id == cell_id:
            return c
    return None
