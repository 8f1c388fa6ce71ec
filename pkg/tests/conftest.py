import pytest

VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record a criterion outcome line, then fail the test if it did not hold."""

    def record(number: int, ok: bool, detail: str) -> None:
        VERDICTS.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(VERDICTS[-1])
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
