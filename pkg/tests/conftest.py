"""Shared fixtures and the acceptance summary printed at the end of a run."""
import numpy as np
import pytest

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    ok, dur = _criteria.get(n, (True, 0.0, title))[:2]
    if rep.when == "call" or rep.failed:
        _criteria[n] = (ok and not rep.failed, dur + rep.duration, title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_criteria):
        ok, dur, title = _criteria[n]
        terminalreporter.write_line(
            f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  ({dur:.1f} s)")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
