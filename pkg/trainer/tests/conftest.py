_criterion_lines = {}


def record_criterion(number, passed, detail):
    verdict = "PASS" if passed else "FAIL"
    _criterion_lines[number] = f"criterion {number:2d}: {verdict} — {detail}"


def pytest_terminal_summary(terminalreporter):
    if not _criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criterion_lines):
        terminalreporter.write_line(_criterion_lines[number])
