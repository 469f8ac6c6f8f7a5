import pytest

from wtaplan.interference import build_interference_table
from wtaplan.pips import build_pip_set
from wtaplan.scenario import build_w_formation_scenario, generate_target_tracks


def _delays(scenario):
    return {f.id: f.launch_delay for f in scenario.weapon_farms}


@pytest.fixture(scope="session")
def case1():
    s = build_w_formation_scenario(1)
    tracks = generate_target_tracks(s, seed=0)
    pips = build_pip_set(s, tracks)
    return s, tracks, pips


@pytest.fixture(scope="session")
def case1_table(case1):
    s, _, pips = case1
    return build_interference_table(pips, s.interference_params, _delays(s))


@pytest.fixture(scope="session")
def case2():
    s = build_w_formation_scenario(2)
    tracks = generate_target_tracks(s, seed=0)
    pips = build_pip_set(s, tracks)
    return s, tracks, pips


@pytest.fixture(scope="session")
def case2_table(case2):
    s, _, pips = case2
    return build_interference_table(pips, s.interference_params, _delays(s))


# --- acceptance summary -----------------------------------------------------

_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        name = report.nodeid.split("::")[-1]
        detail = dict(report.user_properties).get("detail", "")
        _ACCEPTANCE[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, (status, detail) in sorted(_ACCEPTANCE.items()):
        terminalreporter.write_line(f"{status} {name}: {detail}")
