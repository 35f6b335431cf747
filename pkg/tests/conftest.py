import pytest

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def report():
    def _report(n: int, status: str, detail: str = "") -> None:
        line = f"criterion {n:>2}: {status} {detail}".rstrip()
        ACCEPTANCE_LINES.append(line)
        print(line)
    return _report
