import pytest

_RESULTS = []


@pytest.fixture(scope="session")
def criteria():
    """Collects one pass/fail line per acceptance criterion."""
    return _RESULTS


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _RESULTS:
            terminalreporter.write_line(line)
