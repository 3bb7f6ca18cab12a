import pytest

_LINES = []


@pytest.fixture
def report_line():
    """Record a one-line PASS/FAIL summary shown at the end of the session."""
    def emit(line):
        _LINES.append(line)
        print(line)
    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
