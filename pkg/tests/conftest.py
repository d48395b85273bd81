import re

import pytest

_CRITERIA: dict[int, list[str]] = {}
_TITLES: dict[int, str] = {}
_NOTES: list[str] = []


@pytest.fixture
def acceptance_note():
    """Append a line to the acceptance summary printed at the end of the run."""
    return _NOTES.append


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    m = re.search(r"test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    if report.when == "call" or report.outcome != "passed":
        n = int(m.group(1))
        _TITLES.setdefault(n, m.group(2).replace("_", " "))
        _CRITERIA.setdefault(n, []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok = all(o == "passed" for o in _CRITERIA[n])
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {_TITLES[n]}")
    for note in _NOTES:
        terminalreporter.write_line(f"  {note}")
