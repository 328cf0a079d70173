import pytest

_ACCEPTANCE: list[str] = []


@pytest.fixture
def report_criterion():
    """Record a one-line verdict for the acceptance summary."""

    def record(number: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE.append(f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
