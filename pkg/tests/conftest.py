import pytest

_LINES = []


@pytest.fixture
def verdict():
    """Record one pass/fail line per acceptance criterion and print it."""
    def record(number, passed, detail):
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        _LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
