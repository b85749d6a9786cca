import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number covered by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and not report.failed):
        return
    entry = _RESULTS.setdefault(marker.args[0], {"passed": [], "failed": []})
    (entry["failed"] if report.failed else entry["passed"]).append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        status = "FAIL" if entry["failed"] else "PASS"
        line = f"criterion {number}: {status} ({len(entry['passed'])} passed, {len(entry['failed'])} failed)"
        if entry["failed"]:
            line += " - failing: " + ", ".join(entry["failed"])
        terminalreporter.write_line(line)
