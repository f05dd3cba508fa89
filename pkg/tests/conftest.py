import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE_LINES: list[tuple[str, str]] = []


_RECORDED: set[str] = set()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(label: str, passed: bool, detail: str) -> None:
        line = f"criterion {label:<3} {'PASS' if passed else 'FAIL'}  {detail}"
        _RECORDED.add(request.node.nodeid)
        ACCEPTANCE_LINES.append((label, line))
        print(line)
        assert passed, line

    return record


def pytest_runtest_logreport(report):
    # a criterion that raised before reaching its verdict still gets a FAIL line
    if report.when == "call" and report.failed and report.nodeid not in _RECORDED:
        if "test_acceptance" in report.nodeid:
            label = report.nodeid.split("::")[-1].removeprefix("test_criterion_").split("_")[0]
            ACCEPTANCE_LINES.append((label, f"criterion {label:<3} FAIL  raised: {report.nodeid}"))


def _order(label: str):
    digits = "".join(ch for ch in label if ch.isdigit())
    return int(digits or 0), label


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES, key=lambda t: _order(t[0])):
            terminalreporter.write_line(line)
