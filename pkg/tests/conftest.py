import pytest

_LINES: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion(request):
    """``criterion(label, passed, detail)`` records one acceptance line; the test still asserts on its own."""

    def record(label: str, passed: bool, detail: str) -> bool:
        _LINES.append((label, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(_LINES, key=lambda t: _order(t[0])):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {label}: {detail}")


def _order(label: str):
    head = label.split()[0]
    digits = "".join(c for c in head if c.isdigit())
    return int(digits or 0), head
