import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


def pytest_addoption(parser):
    parser.addoption(
        "--benchmark-optima",
        action="store_true",
        default=False,
        help="run the benchmark optima checks (instances from $REBACKTRACK_INSTANCES)",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--benchmark-optima"):
        return
    skip = pytest.mark.skip(reason="needs --benchmark-optima")
    for item in items:
        if "benchmark_optima" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def instances_dir():
    raw = os.environ.get("REBACKTRACK_INSTANCES")
    return Path(raw) if raw else None


# -- acceptance report ----------------------------------------------------------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    entry = _criteria.setdefault(number, {"title": title, "states": []})
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        entry["states"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        states = entry["states"]
        if not states:
            verdict = "NOT RUN"
        elif "failed" in states:
            verdict = "FAIL"
        elif all(s == "skipped" for s in states):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {entry['title']}")
