import pytest

_REPORT: list[str] = []


@pytest.fixture
def report():
    """Record a one-line verdict for an acceptance criterion, then assert it."""

    def _report(label: str, ok: bool, detail: str = ""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
        _REPORT.append(line)
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
