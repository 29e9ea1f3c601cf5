import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported in the summary")


def pytest_runtest_logreport(report):
    label = _LABELS.get(report.nodeid)
    if label is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        detail = ""
        if report.outcome == "skipped" and isinstance(report.longrepr, tuple):
            detail = f" ({report.longrepr[2]})"
        prev = _CRITERIA.get(label)
        if prev is None or prev[0] == "PASS":
            _CRITERIA[label] = (outcome, detail)


_LABELS = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _LABELS[item.nodeid] = mark.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA, key=lambda s: (int(s.split()[0][1:].rstrip("ab")), s)):
        outcome, detail = _CRITERIA[label]
        terminalreporter.write_line(f"{outcome:4}  {label}{detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20070601)
