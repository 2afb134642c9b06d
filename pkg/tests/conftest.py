import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture(scope="session")
def G3():
    from interlacements.green import cached_table

    return cached_table(3, 12)


ACCEPTANCE_LINES: list = []


@pytest.fixture
def acceptance():
    """Record one summary line per acceptance criterion."""

    def record(name: str, ok: bool, detail: str = "") -> bool:
        line = f"{name} {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
