import pytest

_LINES: list[str] = []


@pytest.fixture
def record():
    """Record one acceptance verdict; the line is printed and repeated in the terminal summary."""

    def _record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] AC{number:02d} {title}: {detail}"
        _LINES.append(line)
        print(line)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_LINES):
        terminalreporter.write_line(line)
