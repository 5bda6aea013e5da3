import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def _serial_workers(monkeypatch):
    # keep unit tests single-process unless a test asks otherwise
    monkeypatch.setenv("PHYSEST_THREADS", os.environ.get("PHYSEST_TEST_THREADS", "1"))


# -- acceptance report --------------------------------------------------------

_REPORT = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): headline acceptance criterion")


@pytest.fixture
def detail(request):
    """Free-form measurements shown next to the criterion's pass/fail line."""
    notes = []
    request.node._criterion_notes = notes
    return notes


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        notes = "; ".join(getattr(item, "_criterion_notes", []))
        _REPORT[item.nodeid] = (mark.args[0], status, notes)


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for name, status, notes in _REPORT.values():
        terminalreporter.write_line(f"{status}  {name}" + (f"  [{notes}]" if notes else ""))
