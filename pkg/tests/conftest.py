"""Shared fixtures: a recorder that echoes acceptance lines into the report."""

import pytest

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture()
def acceptance_line():
    """Record a one-line verdict to repeat in the terminal summary."""

    def _record(line: str) -> None:
        _ACCEPTANCE_LINES.append(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
