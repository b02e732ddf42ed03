"""Shared test configuration: acceptance-criterion result reporting."""

_criterion_lines = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Register a one-line verdict shown in the terminal summary."""
    verdict = "PASS" if passed else "FAIL"
    _criterion_lines[number] = f"criterion {number:2d}: {verdict} — {detail}"


def pytest_terminal_summary(terminalreporter):
    if not _criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criterion_lines):
        terminalreporter.write_line(_criterion_lines[number])
