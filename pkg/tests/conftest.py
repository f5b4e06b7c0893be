import numpy as np
import pytest

from iontfim.ionchain import TrapConfig

TWO_PI = 2 * np.pi


def make_trap(n, axial_mhz=0.5, transverse_mhz=4.5):
    return TrapConfig(n_ions=n, axial_freq=TWO_PI * axial_mhz * 1e6, transverse_freq=TWO_PI * transverse_mhz * 1e6)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# one PASS/FAIL line per acceptance criterion in the terminal summary
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by this test")


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", m.args))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    number, title = crit
    entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "ran": False})
    if report.when == "call":
        entry["ran"] = True
    if report.failed or report.skipped:
        entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["ok"] and e["ran"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {e['title']}")
