import pytest

from helpers import desk_config, two_cell_desk_scenario
from idlenes.energy import fit_linear_cost
from idlenes.radio import compute_link_map
from idlenes.twin import generate


@pytest.fixture(scope="session")
def desk_scenario():
    return generate(desk_config(seed=1))


@pytest.fixture(scope="session")
def desk_link_map(desk_scenario):
    return compute_link_map(desk_scenario)


@pytest.fixture(scope="session")
def fitted():
    return fit_linear_cost()


@pytest.fixture(scope="session")
def two_cell_scenario():
    return two_cell_desk_scenario()


_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    name = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.failed):
        detail = dict(report.user_properties).get("detail", "")
        _ACCEPTANCE[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (verdict, detail) in _ACCEPTANCE.items():
        terminalreporter.write_line(f"{verdict}  {name}: {detail}")
