"""Deterministic synthetic digital twin: a Manhattan street grid with buildings,
street foliage, candidate poles on the curbs and an outdoor traffic-point grid.

Random stream layout. ``SeedSequence(seed).spawn(4)`` yields four children,
each driving its own ``Philox`` generator, consumed in this order:

0. buildings: block permutation, then per building (width, depth, x offset,
   y offset, height);
1. foliage: per region (orientation, corridor index, along-street position,
   length, width);
2. poles: one permutation of the sorted curb candidates;
3. boresights: one uniform draw per selected pole.

Changing the number of buildings therefore never perturbs pole placement.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .energy import PowerConfig
from .scenario import Building, Foliage, RFParams, Scenario, make_site


class ConfigError(ValueError):
    """Invalid or infeasible twin configuration; ``field`` names the culprit."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class TwinConfig:
    width: float = 120.0
    height: float = 120.0
    block_pitch: float = 40.0
    street_width: float = 12.0
    building_count: int = 4
    building_min_size: float = 14.0
    building_max_size: float = 26.0
    building_min_height: float = 15.0
    building_max_height: float = 40.0
    buildings: Optional[tuple] = None  # explicit (x0, y0, x1, y1, height) boxes override random placement
    foliage_count: int = 3
    foliage_min_size: float = 3.0
    foliage_max_size: float = 8.0
    foliage: Optional[tuple] = None
    pole_density: float = 400.0  # poles per km^2
    n_poles: Optional[int] = None  # overrides pole_density when set
    pole_height: float = 10.0
    pole_min_spacing: float = 15.0
    tx_power: float = 10.0
    tp_resolution: float = 1.0
    seed: int = 0
    rf_params: RFParams = field(default_factory=RFParams)
    power_model: PowerConfig = field(default_factory=PowerConfig)

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ConfigError("width" if not self.width > 0 else "height", "area must be positive")
        if self.tp_resolution <= 0:
            raise ConfigError("tp_resolution", "must be > 0")
        for name in ("building_count", "foliage_count", "pole_density"):
            if getattr(self, name) < 0:
                raise ConfigError(name, "must be non-negative")
        if self.n_poles is not None and self.n_poles < 0:
            raise ConfigError("n_poles", "must be non-negative")
        if self.street_width <= 0 or self.block_pitch <= self.street_width:
            raise ConfigError("block_pitch", "must exceed street_width (> 0)")
        if self.building_min_size <= 0 or self.building_max_size < self.building_min_size:
            raise ConfigError("building_max_size", "need 0 < building_min_size <= building_max_size")
        if self.building_min_height <= 0 or self.building_max_height < self.building_min_height:
            raise ConfigError("building_max_height", "need 0 < building_min_height <= building_max_height")
        if self.foliage_min_size <= 0 or self.foliage_max_size < self.foliage_min_size:
            raise ConfigError("foliage_max_size", "need 0 < foliage_min_size <= foliage_max_size")
        if self.pole_height <= self.rf_params.ue_height:
            raise ConfigError("pole_height", "must exceed the UE height")

    @property
    def pole_count(self):
        if self.n_poles is not None:
            return int(self.n_poles)
        return int(round(self.pole_density * self.width * self.height / 1e6))

    def to_dict(self):
        d = asdict(self)
        d["buildings"] = None if self.buildings is None else [list(b) for b in self.buildings]
        d["foliage"] = None if self.foliage is None else [list(f) for f in self.foliage]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        for k in d:
            if k not in known:
                raise ConfigError(k, "unknown configuration field")
        kw = {}
        try:
            for k, v in d.items():
                if k == "rf_params":
                    kw[k] = RFParams.from_dict(v or {})
                elif k == "power_model":
                    kw[k] = PowerConfig.from_dict(v or {})
                elif k in ("buildings", "foliage"):
                    width = 5 if k == "buildings" else 4
                    if v is None:
                        kw[k] = None
                        continue
                    rows = tuple(tuple(float(x) for x in row) for row in v)
                    if any(len(r) != width for r in rows):
                        raise ConfigError(k, f"each entry needs {width} numbers")
                    kw[k] = rows
                elif k in ("building_count", "foliage_count", "seed") or (k == "n_poles" and v is not None):
                    if isinstance(v, bool) or float(v) != int(float(v)):
                        raise ConfigError(k, f"expected an integer, got {v!r}")
                    kw[k] = int(v)
                elif k == "n_poles":
                    kw[k] = None
                else:
                    kw[k] = float(v)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(k, str(exc)) from None
        return cls(**kw)


def load_config(path) -> TwinConfig:
    with open(path) as fh:
        text = fh.read()
    if str(path).endswith((".yaml", ".yml")):
        import yaml

        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError("<file>", f"malformed YAML: {exc}") from None
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<file>", f"malformed JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("<file>", "top level must be a mapping")
    return TwinConfig.from_dict(data)


def _streams(seed):
    children = np.random.SeedSequence(seed).spawn(4)
    return [np.random.Generator(np.random.Philox(c)) for c in children]


def _corridors(extent, pitch):
    return [k * pitch for k in range(int(math.floor(extent / pitch)) + 1)]


def _blocks(cfg):
    half = cfg.street_width / 2
    out = []
    for ky in range(int(cfg.height // cfg.block_pitch)):
        for kx in range(int(cfg.width // cfg.block_pitch)):
            x0 = kx * cfg.block_pitch + half + 1
            y0 = ky * cfg.block_pitch + half + 1
            x1 = (kx + 1) * cfg.block_pitch - half - 1
            y1 = (ky + 1) * cfg.block_pitch - half - 1
            if x1 > x0 and y1 > y0:
                out.append((x0, y0, x1, y1))
    return out


def _place_buildings(cfg, rng):
    if cfg.buildings is not None:
        return [Building(*b) for b in cfg.buildings]
    blocks = _blocks(cfg)
    order = rng.permutation(len(blocks))
    out = []
    for bi in order[: cfg.building_count]:
        x0, y0, x1, y1 = blocks[bi]
        w = min(float(rng.integers(int(cfg.building_min_size), int(cfg.building_max_size) + 1)), math.floor(x1 - x0))
        d = min(float(rng.integers(int(cfg.building_min_size), int(cfg.building_max_size) + 1)), math.floor(y1 - y0))
        ox = float(rng.integers(0, int(math.floor(x1 - x0 - w)) + 1))
        oy = float(rng.integers(0, int(math.floor(y1 - y0 - d)) + 1))
        h = float(round(rng.uniform(cfg.building_min_height, cfg.building_max_height), 1))
        bx0, by0 = math.ceil(x0) + ox, math.ceil(y0) + oy
        out.append(Building(bx0, by0, bx0 + w, by0 + d, h))
    return out


def _place_foliage(cfg, rng):
    if cfg.foliage is not None:
        return [Foliage(*f) for f in cfg.foliage]
    vertical = _corridors(cfg.width, cfg.block_pitch)
    horizontal = _corridors(cfg.height, cfg.block_pitch)
    half = cfg.street_width / 2
    out = []
    for _ in range(cfg.foliage_count):
        is_vertical = bool(rng.integers(0, 2))
        lines = vertical if is_vertical else horizontal
        center = lines[int(rng.integers(0, len(lines)))]
        along_extent = cfg.height if is_vertical else cfg.width
        pos = float(rng.integers(0, max(1, int(along_extent))))
        length = float(rng.integers(int(cfg.foliage_min_size), int(cfg.foliage_max_size) + 1))
        width = float(rng.integers(1, max(2, int(half))))
        a0, a1 = pos, min(along_extent, pos + length)
        c0, c1 = center - width / 2, center + width / 2
        if is_vertical:
            out.append(Foliage(max(0.0, c0), a0, min(cfg.width, c1), a1))
        else:
            out.append(Foliage(a0, max(0.0, c0), a1, min(cfg.height, c1)))
    return [f for f in out if f.x1 > f.x0 and f.y1 > f.y0]


def traffic_grid(cfg, buildings):
    res = cfg.tp_resolution
    xs = res / 2 + res * np.arange(int(math.floor(cfg.width / res + 1e-9)))
    ys = res / 2 + res * np.arange(int(math.floor(cfg.height / res + 1e-9)))
    gx, gy = np.meshgrid(xs, ys)  # y-major order: row by row from the bottom
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    keep = np.ones(len(pts), dtype=bool)
    for b in buildings:
        keep &= ~((pts[:, 0] > b.x0) & (pts[:, 0] < b.x1) & (pts[:, 1] > b.y0) & (pts[:, 1] < b.y1))
    return pts[keep]


def _curb_candidates(cfg):
    half = cfg.street_width / 2
    pts = set()
    for cx in _corridors(cfg.width, cfg.block_pitch):
        for x in (cx - half, cx + half):
            if 0 < x < cfg.width:
                for y in range(1, int(math.ceil(cfg.height))):
                    pts.add((float(x), float(y)))
    for cy in _corridors(cfg.height, cfg.block_pitch):
        for y in (cy - half, cy + half):
            if 0 < y < cfg.height:
                for x in range(1, int(math.ceil(cfg.width))):
                    pts.add((float(x), float(y)))
    return sorted(pts)


def _place_poles(cfg, rng, buildings, tp):
    candidates = _curb_candidates(cfg)
    tp_set = {(float(x), float(y)) for x, y in tp}
    chosen = []
    for i in rng.permutation(len(candidates)):
        if len(chosen) >= cfg.pole_count:
            break
        x, y = candidates[i]
        if (x, y) in tp_set:
            continue
        if any(b.x0 <= x <= b.x1 and b.y0 <= y <= b.y1 for b in buildings):
            continue
        if any(math.hypot(x - px, y - py) < cfg.pole_min_spacing for px, py in chosen):
            continue
        chosen.append((x, y))
    return chosen


def generate(cfg: TwinConfig) -> Scenario:
    """Build a :class:`Scenario` from ``cfg``; a pure function of the config."""
    rng_bld, rng_fol, rng_pole, rng_bore = _streams(cfg.seed)
    buildings = _place_buildings(cfg, rng_bld)
    for k, b in enumerate(buildings):
        if not (b.x1 > b.x0 and b.y1 > b.y0 and b.height > 0):
            raise ConfigError("buildings", f"building {k} is degenerate")
    foliage = _place_foliage(cfg, rng_fol)
    tp = traffic_grid(cfg, buildings)
    if len(tp) == 0:
        raise ConfigError("buildings", "buildings cover the whole area; no outdoor traffic points remain")
    poles = _place_poles(cfg, rng_pole, buildings, tp)
    if cfg.pole_count > 0 and len(poles) < cfg.pole_count:
        raise ConfigError(
            "pole_density" if cfg.n_poles is None else "n_poles",
            f"only {len(poles)} of {cfg.pole_count} poles fit with spacing {cfg.pole_min_spacing} m",
        )
    cells = []
    for sid, (x, y) in enumerate(poles):
        bore = float(round(rng_bore.uniform(0.0, 120.0), 2))
        cells.extend(
            make_site(sid, len(cells), x, y, cfg.pole_height, bore, cfg.tx_power, max_array_gain=28.15)
        )
    return Scenario(
        cells=tuple(cells),
        traffic_points=tp,
        buildings=tuple(buildings),
        foliage=tuple(foliage),
        rf_params=cfg.rf_params,
        power_model=cfg.power_model,
        seed=cfg.seed,
    )
