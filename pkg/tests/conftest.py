import numpy as np
import pytest

from gaussbmo.geometry import GaussContext


@pytest.fixture
def ctx1():
    return GaussContext(1)


@pytest.fixture
def ctx2():
    return GaussContext(2)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(key=2024))


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    num, title = mark.args
    prev = _CRITERIA.get(num, (title, True))
    ok = prev[1] and not rep.failed and not (rep.when == "call" and rep.skipped)
    _CRITERIA[num] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        title, ok = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {title}")
