import pytest

CRITERIA_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(number, title, passed, detail)``."""
    def record(num, title, passed, detail=""):
        line = f"criterion {num} [{'PASS' if passed else 'FAIL'}] {title}" + (f" -- {detail}" if detail else "")
        CRITERIA_LINES.append((num, line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(CRITERIA_LINES):
            terminalreporter.write_line(line)
