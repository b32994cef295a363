import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


_criteria: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(key, title): acceptance criterion covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    key, title = mark.args
    entry = _criteria.setdefault(key, {"title": title, "status": "PASS", "seconds": 0.0, "ran": False})
    if rep.skipped:
        if not entry["ran"]:
            entry["status"] = "SKIP"
        return
    if rep.when == "call":
        entry["seconds"] += rep.duration
        if not entry["ran"] and entry["status"] == "SKIP":
            entry["status"] = "PASS"
        entry["ran"] = True
    if rep.failed:
        entry["status"] = "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria, key=lambda k: [int(p) if p.isdigit() else p for p in k.split(".")]):
        e = _criteria[key]
        terminalreporter.write_line(f"criterion {key}: {e['status']}  {e['title']}  ({e['seconds']:.1f} s)")
