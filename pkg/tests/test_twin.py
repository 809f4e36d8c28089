import numpy as np
import pytest

from helpers import desk_config
from idlenes.scenario import validate
from idlenes.twin import ConfigError, TwinConfig, generate


def _open(**kw):
    base = dict(width=100, height=100, n_poles=0, building_count=0, foliage_count=0, tp_resolution=1.0)
    base.update(kw)
    return TwinConfig(**base)


def test_full_grid():
    assert generate(_open()).n_tp == 10000


def test_grid_minus_building():
    scen = generate(_open(buildings=((40.0, 40.0, 60.0, 60.0, 20.0),)))
    assert scen.n_tp == 10000 - 400


def test_no_tp_inside_buildings(desk_scenario):
    tp = desk_scenario.traffic_points
    for b in desk_scenario.buildings:
        inside = (tp[:, 0] > b.x0) & (tp[:, 0] < b.x1) & (tp[:, 1] > b.y0) & (tp[:, 1] < b.y1)
        assert not inside.any()


@pytest.mark.parametrize("seed", [0, 1, 7])
def test_deterministic(seed):
    a, b = generate(desk_config(seed)), generate(desk_config(seed))
    assert a.dumps() == b.dumps()


def test_seed_changes_layout():
    assert generate(desk_config(1)).dumps() != generate(desk_config(2)).dumps()


@pytest.mark.parametrize("seed", range(5))
def test_three_sectors_per_pole_and_valid(seed):
    scen = generate(desk_config(seed, n_poles=4, size=80))
    assert validate(scen) == []
    for sid in scen.site_ids():
        cells = [c for c in scen.cells if c.site_id == sid]
        assert len(cells) == 3
        bores = sorted(c.boresight_azimuth for c in cells)
        assert np.allclose(np.diff(bores), 120.0)


def test_default_config_validates():
    assert validate(generate(TwinConfig())) == []


@pytest.mark.parametrize(
    "kw, field",
    [
        (dict(width=0), "width"),
        (dict(tp_resolution=0), "tp_resolution"),
        (dict(building_count=-1), "building_count"),
        (dict(pole_height=1.0), "pole_height"),
    ],
)
def test_invalid_config_names_field(kw, field):
    with pytest.raises(ConfigError) as exc:
        _open(**kw)
    assert exc.value.field == field


def test_unknown_field():
    with pytest.raises(ConfigError) as exc:
        TwinConfig.from_dict({"widht": 10})
    assert exc.value.field == "widht"


def test_buildings_cover_everything():
    with pytest.raises(ConfigError) as exc:
        generate(_open(width=10, height=10, buildings=((-1.0, -1.0, 11.0, 11.0, 5.0),)))
    assert exc.value.field == "buildings"


def test_too_many_poles():
    with pytest.raises(ConfigError) as exc:
        generate(desk_config(0, n_poles=500, size=40))
    assert exc.value.field == "n_poles"


def test_config_round_trip():
    cfg = desk_config(3, buildings=((1.0, 1.0, 5.0, 5.0, 9.0),))
    assert TwinConfig.from_dict(cfg.to_dict()) == cfg
