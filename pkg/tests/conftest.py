import pytest

_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one pass/fail line per acceptance criterion.

    Call ``report(tag, ok, detail)`` just before asserting ``ok``.
    """

    def record(tag: str, ok: bool, detail: str = "") -> None:
        _LINES.append(f"{'PASS' if ok else 'FAIL'} {tag}" + (f": {detail}" if detail else ""))

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
