"""Beam gains, link budgets and the binary coverage matrices built from them.

Propagation is free space at the carrier frequency with a geometric blockage
test against building boxes, foliage attenuation proportional to the path
length inside foliage regions, and at most one specular wall reflection. Each
(beam, traffic point) pair keeps its strongest path. This is a deliberately
simple stand-in for ray tracing.
"""
from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .scenario import NO_PATH_DB, RFParams

SPEED_OF_LIGHT = 299_792_458.0


class RowKind(str, enum.Enum):
    CELL = "Cell"
    BEAM = "Beam"
    POLE = "Pole"


def fspl_db(distance_m, carrier_ghz=28.0):
    """Free-space path loss, ``20 log10(4 pi d f / c)``."""
    return 20.0 * np.log10(distance_m) + fspl_constant(carrier_ghz)


def fspl_constant(carrier_ghz):
    return 20.0 * math.log10(4.0 * math.pi * carrier_ghz * 1e9 / SPEED_OF_LIGHT)


def noise_power_dbm(rf: RFParams):
    return rf.thermal_noise_density + 10.0 * math.log10(rf.bandwidth_mhz * 1e6) + rf.noise_figure_ue


def budget_constant_db(rf: RFParams):
    """Every geometry-independent term of the SNR except transmit power and beam gain."""
    return rf.ue_gain - rf.body_loss - rf.implementation_margin - rf.cell_edge_reliability_margin - noise_power_dbm(rf)


def _budget(rf: RFParams):
    return (
        fspl_constant(rf.carrier_ghz),
        rf.reflection_loss,
        rf.foliage_loss_per_m,
        budget_constant_db(rf),
        rf.sidelobe_drop,
    )


def beam_gain(beam, azimuth, elevation, sidelobe_drop=20.0):
    """Flat-top pattern: peak gain inside the footprint (edges inclusive), ``peak - 20 dB`` elsewhere."""
    az = (np.asarray(azimuth, dtype=np.float64) + 180.0) % 360.0 - 180.0
    el = np.asarray(elevation, dtype=np.float64)
    inside = (np.abs(az - beam.azimuth_center) <= beam.azimuth_width / 2) & (
        np.abs(el - beam.elevation_center) <= beam.elevation_width / 2
    )
    g = np.where(inside, beam.peak_gain, beam.peak_gain - sidelobe_drop)
    return float(g) if g.ndim == 0 else g


def _blockers(buildings, foliage):
    bld = np.array([[b.x0, b.y0, b.x1, b.y1, b.height] for b in buildings], dtype=np.float64).reshape(-1, 5)
    fol = np.array([[f.x0, f.y0, f.x1, f.y1] for f in foliage], dtype=np.float64).reshape(-1, 4)
    return bld, fol


def link_snr(cell, beam, tp, rf: RFParams, buildings=(), foliage=()):
    """SNR in dB of one beam of ``cell`` at traffic point ``tp`` (``(x, y)`` or TrafficPoint).

    Returns ``NO_PATH_DB`` when neither a line-of-sight nor a single-reflection
    path exists.
    """
    tx, ty = (tp.x, tp.y) if hasattr(tp, "x") else tp
    if math.isclose(tx, cell.x, abs_tol=1e-12) and math.isclose(ty, cell.y, abs_tol=1e-12):
        raise ValueError("traffic point coincides with the cell position; azimuth is undefined")
    bld, fol = _blockers(buildings, foliage)
    out = kernels.link_snr_matrix(
        np.array([[cell.x, cell.y, cell.height]]),
        np.array([cell.boresight_azimuth]),
        np.array([cell.tx_power]),
        np.array([[beam.as_row()]]),
        np.array([[tx, ty]]),
        rf.ue_height,
        bld,
        fol,
        _budget(rf),
    )
    return float(out[0, 0])


@dataclass(frozen=True, eq=False)
class LinkGainMap:
    """Per-candidate-beam link SNR (dB), rows cell-major, columns traffic points."""

    snr: np.ndarray
    n_cells: int
    beams_per_cell: int
    baseline_index: np.ndarray  # (C, 32) pool indices of each cell's baseline beams

    def cell_block(self, c):
        return self.snr[c * self.beams_per_cell : (c + 1) * self.beams_per_cell]

    def baseline_rows(self):
        """Row indices (into ``snr``) of every cell's baseline beams, shape (C, 32)."""
        return np.arange(self.n_cells)[:, None] * self.beams_per_cell + self.baseline_index

    def cell_snr(self):
        """(C, N) best baseline-beam SNR per cell."""
        if self.n_cells == 0:
            return np.zeros((0, self.snr.shape[1]))
        return self.snr[self.baseline_rows()].max(axis=1)


def compute_link_map(scenario, use_numba=None) -> LinkGainMap:
    cells = scenario.cells
    bld, fol = _blockers(scenario.buildings, scenario.foliage)
    n_b = scenario.beams_per_cell
    if cells:
        beams = np.array([[b.as_row() for b in c.candidate_beam_pool] for c in cells], dtype=np.float64)
        baseline_index = np.stack([c.baseline_pool_indices() for c in cells])
    else:
        beams = np.zeros((0, 0, 5))
        baseline_index = np.zeros((0, 32), dtype=np.int64)
    tp = scenario.traffic_points
    if cells and tp.size:
        for c in cells:
            if np.any((tp[:, 0] == c.x) & (tp[:, 1] == c.y)):
                raise ValueError(f"traffic point coincides with cell {c.id} position")
    snr = kernels.link_snr_matrix(
        np.array([c.position for c in cells], dtype=np.float64).reshape(-1, 3),
        np.array([c.boresight_azimuth for c in cells], dtype=np.float64),
        np.array([c.tx_power for c in cells], dtype=np.float64),
        beams.reshape(len(cells), n_b, 5),
        tp,
        scenario.rf_params.ue_height,
        bld,
        fol,
        _budget(scenario.rf_params),
        use_numba=use_numba,
    )
    snr.setflags(write=False)
    return LinkGainMap(snr=snr, n_cells=len(cells), beams_per_cell=n_b, baseline_index=baseline_index)


@dataclass(frozen=True, eq=False)
class ConnectivityMatrix:
    entries: np.ndarray  # (rows, len(covered_tp_ids)) bool
    row_kind: RowKind
    threshold_db: float
    covered_tp_ids: np.ndarray

    @property
    def shape(self):
        return self.entries.shape

    def restrict(self, tp_ids):
        """Same rows, columns limited to ``tp_ids`` (which must be present)."""
        pos = {int(t): k for k, t in enumerate(self.covered_tp_ids)}
        cols = np.array([pos[int(t)] for t in tp_ids], dtype=np.int64)
        return ConnectivityMatrix(self.entries[:, cols], self.row_kind, self.threshold_db, np.asarray(tp_ids))


def pole_snr(scenario, link_map):
    """(P, N) best baseline SNR over the three cells of each pole, poles in ``site_ids()`` order."""
    cell_snr = link_map.cell_snr()
    sites = scenario.site_ids()
    site_of = np.array([c.site_id for c in scenario.cells])
    return np.stack([cell_snr[site_of == s].max(axis=0) for s in sites]) if sites else np.zeros((0, scenario.n_tp))


def build_connectivity(scenario, threshold_db, granularity=RowKind.CELL, link_map=None) -> ConnectivityMatrix:
    """Binary coverage matrix, entry 1 iff link SNR >= ``threshold_db``.

    Cell rows use each cell's best baseline-codebook beam; Beam rows are every
    candidate beam (cell-major); Pole rows take the best of a pole's cells.
    """
    granularity = RowKind(granularity)
    link_map = link_map if link_map is not None else compute_link_map(scenario)
    if granularity is RowKind.CELL:
        snr = link_map.cell_snr()
    elif granularity is RowKind.BEAM:
        snr = link_map.snr
    else:
        snr = pole_snr(scenario, link_map)
    return ConnectivityMatrix(
        entries=snr >= threshold_db,
        row_kind=granularity,
        threshold_db=float(threshold_db),
        covered_tp_ids=np.arange(scenario.n_tp),
    )


def build_incidence(scenario) -> np.ndarray:
    """(N_C * N_B, N_C) beam-to-cell incidence, rows cell-major."""
    return incidence_matrix(scenario.n_cells, scenario.beams_per_cell)


def incidence_matrix(n_cells, beams_per_cell):
    return np.kron(np.eye(n_cells, dtype=np.int8), np.ones((beams_per_cell, 1), dtype=np.int8))


# ---------------------------------------------------------------------------
# binary matrix format: u32 rows, u32 cols, then little-endian f32 row-major
# ---------------------------------------------------------------------------

_HEADER = struct.Struct("<II")


def write_matrix(path, matrix):
    m = np.asarray(matrix)
    if m.ndim != 2:
        raise ValueError("only 2-D matrices can be written")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(*m.shape))
        fh.write(np.ascontiguousarray(m, dtype="<f4").tobytes())


def read_matrix(path):
    with open(path, "rb") as fh:
        rows, cols = _HEADER.unpack(fh.read(_HEADER.size))
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).astype(np.float64)


def save_connectivity(path, conn: ConnectivityMatrix):
    """Write ``path`` (binary matrix) plus ``path + '.json'`` sidecar header."""
    write_matrix(path, conn.entries.astype(np.float32))
    header = {
        "row_kind": conn.row_kind.value,
        "threshold_db": conn.threshold_db,
        "rows": int(conn.entries.shape[0]),
        "cols": int(conn.entries.shape[1]),
        "covered_tp_ids": [int(t) for t in conn.covered_tp_ids],
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(header, fh, sort_keys=True)


def load_connectivity(path) -> ConnectivityMatrix:
    with open(str(path) + ".json") as fh:
        header = json.load(fh)
    m = read_matrix(path)
    if m.shape != (header["rows"], header["cols"]):
        raise ValueError("sidecar dimensions do not match the matrix file")
    return ConnectivityMatrix(
        entries=m > 0.5,
        row_kind=RowKind(header["row_kind"]),
        threshold_db=float(header["threshold_db"]),
        covered_tp_ids=np.asarray(header["covered_tp_ids"], dtype=np.int64),
    )


def save_link_map(path, link_map: LinkGainMap):
    write_matrix(path, link_map.snr)
    with open(str(path) + ".json", "w") as fh:
        json.dump(
            {
                "quantity": "link_snr_db",
                "sentinel": NO_PATH_DB,
                "n_cells": link_map.n_cells,
                "beams_per_cell": link_map.beams_per_cell,
                "rows": int(link_map.snr.shape[0]),
                "cols": int(link_map.snr.shape[1]),
            },
            fh,
            sort_keys=True,
        )
