import time
from collections import defaultdict

import numpy as np
import pandas as pd
import pytest

_ACCEPTANCE: dict[int, dict] = defaultdict(lambda: {"title": "", "ok": True, "seconds": 0.0,
                                                    "tests": 0})


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    start = time.perf_counter()
    outcome = yield
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        number, title = marker.args
        entry = _ACCEPTANCE[number]
        entry["title"] = title
        entry["seconds"] += time.perf_counter() - start
        entry["tests"] += 1
        if outcome.excinfo is not None:
            entry["ok"] = False


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[number]
        status = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(
            f"criterion {number:>2}: {status}  {e['title']}  ({e['tests']} test(s), "
            f"{e['seconds']:.1f} s)")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def write_csv(path, columns: dict, dates=None):
    n = len(next(iter(columns.values())))
    dates = dates if dates is not None else pd.bdate_range("2020-01-01", periods=n)
    frame = pd.DataFrame({"date": pd.DatetimeIndex(dates).strftime("%Y-%m-%d"), **columns})
    frame.to_csv(path, index=False)
    return path
